// SPDX-License-Identifier: Apache-2.0
#include "affect/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "affect/binary.hpp"
#include "affect/error.hpp"

namespace affect::ad {

// ---------------------------------------------------------------------------
// Parameters

std::size_t ParameterSet::add(Parameter p) {
  require(find(p.name) == size(), ErrorCode::InvalidSpec, "duplicate parameter '" + p.name + "'");
  if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterSet::add_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return add({name, {static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)}, Matrix::Zero(rows, cols),
              Matrix::Zero(rows, cols), true});
}

std::size_t ParameterSet::add_bias(const std::string& name, Eigen::Index n) {
  return add({name, {static_cast<std::uint32_t>(n)}, Matrix::Zero(1, n), Matrix::Zero(1, n), true});
}

std::size_t ParameterSet::find(const std::string& name) const {
  const auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
  return static_cast<std::size_t>(it - params_.begin());
}

Eigen::Index ParameterSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

double glorot_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void init_params(ParameterSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params) {
    if (p.dims.size() == 2) {
      const double bound = glorot_bound(p.value.rows(), p.value.cols());
      std::uniform_real_distribution<double> dist(-bound, bound);
      // Row-major draw order, independent of Eigen's storage order.
      for (Eigen::Index r = 0; r < p.value.rows(); ++r)
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = dist(rng);
    } else {
      p.value.setZero();
    }
    p.grad.setZero(p.value.rows(), p.value.cols());
  }
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

double Var::scalar() const {
  const Matrix& v = value();
  require(v.size() == 1, ErrorCode::ShapeMismatch, "scalar() on a non-1x1 node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Parameter& p) {
  nodes_.push_back({p.value, {}, {}, {}, &p, p.trainable});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward) {
  const bool needs = std::any_of(parents.begin(), parents.end(), [&](std::size_t p) { return nodes_[p].needs_grad; });
  nodes_.push_back({std::move(value), {}, std::move(parents), needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  require(root.tape == this, ErrorCode::InvalidSpec, "root belongs to another tape");
  require(nodes_[root.id].value.size() == 1, ErrorCode::NonScalarRoot, "backward needs a 1x1 root");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(root.id, Matrix::Ones(1, 1));
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  fail(ErrorCode::ShapeMismatch, "cannot broadcast " + std::to_string(a) + " against " + std::to_string(b));
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

/// Sums g down to the shape of an operand that was broadcast.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <typename Forward, typename GradA, typename GradB>
Var binary(Var a, Var b, Forward forward, GradA grad_a, GradB grad_b) {
  const Eigen::Index rows = broadcast_dim(a.rows(), b.rows());
  const Eigen::Index cols = broadcast_dim(a.cols(), b.cols());
  const Matrix av = expand(a.value(), rows, cols);
  const Matrix bv = expand(b.value(), rows, cols);
  Matrix out = forward(av, bv);
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, reduce_to(grad_a(g, av, bv), a.rows(), a.cols()));
    if (t.needs_grad(b.id)) t.accumulate(b.id, reduce_to(grad_b(g, av, bv), b.rows(), b.cols()));
  });
}

template <typename Forward, typename Local>
Var unary(Var a, Forward forward, Local local) {
  Matrix out = forward(a.value());
  return a.tape->record(out, {a.id}, [a, out, local](Tape& t, std::size_t self) {
    t.accumulate(a.id, local(t.grad(self), t.value(a.id), out));
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return (-g.array() * x.array() / y.array().square()).matrix();
      });
}

Var scale(Var a, double s) {
  return unary(
      a, [s](const Matrix& x) -> Matrix { return x * s; },
      [s](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g * s; });
}

Var shift(Var a, double s) {
  return unary(
      a, [s](const Matrix& x) -> Matrix { return (x.array() + s).matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var rsub(double s, Var a) {
  return unary(
      a, [s](const Matrix& x) -> Matrix { return (s - x.array()).matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorCode::ShapeMismatch,
          "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " by " + std::to_string(b.rows()) +
              "x" + std::to_string(b.cols()));
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape->record(Matrix::Constant(1, 1, a.value().sum()), {a.id}, [a, rows, cols](Tape& t, std::size_t self) {
    t.accumulate(a.id, Matrix::Constant(rows, cols, t.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, ErrorCode::ShapeMismatch, "mean of an empty node");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var col_sum(Var a) {
  const Eigen::Index rows = a.rows();
  return a.tape->record(a.value().colwise().sum(), {a.id}, [a, rows](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self).replicate(rows, 1));
  });
}

Var col_mean(Var a) {
  require(a.rows() > 0, ErrorCode::ShapeMismatch, "column mean over zero rows");
  return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

Var row_sum(Var a) {
  const Eigen::Index cols = a.cols();
  return a.tape->record(a.value().rowwise().sum(), {a.id}, [a, cols](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self).replicate(1, cols));
  });
}

// ---------------------------------------------------------------------------
// Unary

Var square(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return (2.0 * g.array() * x.array()).matrix(); });
}

Var exp(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); });
}

Var log(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseQuotient(x); });
}

Var relu(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > 0.0).select(g, Matrix::Zero(g.rows(), g.cols()));
      });
}

Var tanh(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return (g.array() * (1.0 - y.array().square())).matrix();
      });
}

Var sigmoid(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return (g.array() * y.array() * (1.0 - y.array())).matrix();
      });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](const Matrix& x) -> Matrix { return x.cwiseMax(lo).cwiseMin(hi); },
      [lo, hi](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() >= lo && x.array() <= hi).select(g, Matrix::Zero(g.rows(), g.cols()));
      });
}

Var softmax_rows(Var a) {
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        Matrix e = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
        return e.array().colwise() / e.rowwise().sum().array();
      },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
        return (y.array() * (g.colwise() - dot).array()).matrix();
      });
}

Var log_softmax_rows(Var a) {
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        const Matrix shifted = x.colwise() - x.rowwise().maxCoeff();
        const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
        return shifted.colwise() - lse;
      },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        const Matrix p = y.array().exp().matrix();
        return g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
      });
}

// ---------------------------------------------------------------------------
// Shape

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, ErrorCode::ShapeMismatch, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(offset);
    offset += p.cols();
  }
  return parts.front().tape->record(std::move(out), ids, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.needs_grad(ids[i])) t.accumulate(ids[i], g.middleCols(offsets[i], t.value(ids[i]).cols()));
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, ErrorCode::ShapeMismatch, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(offset);
    offset += p.rows();
  }
  return parts.front().tape->record(std::move(out), ids, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.needs_grad(ids[i])) t.accumulate(ids[i], g.middleRows(offsets[i], t.value(ids[i]).rows()));
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorCode::ShapeMismatch, "slice out of range");
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape->record(a.value().middleCols(start, count), {a.id},
                        [a, start, count, rows, cols](Tape& t, std::size_t self) {
                          Matrix g = Matrix::Zero(rows, cols);
                          g.middleCols(start, count) = t.grad(self);
                          t.accumulate(a.id, g);
                        });
}

Var gather_rows(Var a, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < a.rows(), ErrorCode::ShapeMismatch, "gather index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Eigen::Index> index(rows.begin(), rows.end());
  const Eigen::Index src_rows = a.rows(), cols = a.cols();
  return a.tape->record(std::move(out), {a.id}, [a, index, src_rows, cols](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix back = Matrix::Zero(src_rows, cols);
    for (std::size_t i = 0; i < index.size(); ++i) back.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a.id, back);
  });
}

Var dropout(Var a, double p, bool train, std::mt19937_64& rng) {
  require(p >= 0.0 && p < 1.0, ErrorCode::ValueOutOfRange, "dropout probability must lie in [0,1)");
  if (!train || p == 0.0) return a;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix keep(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < keep.rows(); ++r)
    for (Eigen::Index c = 0; c < keep.cols(); ++c) keep(r, c) = u(rng) >= p ? 1.0 / (1.0 - p) : 0.0;
  return mul(a, a.tape->constant(std::move(keep)));
}

Var dense(Var x, Var w, Var b) { return add(matmul(x, w), b); }

// ---------------------------------------------------------------------------
// GRU

GruCell GruCell::create(ParameterSet& params, const std::string& prefix, Eigen::Index input_dim,
                        Eigen::Index hidden_dim) {
  GruCell cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  const Eigen::Index joint = input_dim + hidden_dim;
  cell.w_update = params.add_weight(prefix + ".W_update", joint, hidden_dim);
  cell.b_update = params.add_bias(prefix + ".b_update", hidden_dim);
  cell.w_reset = params.add_weight(prefix + ".W_reset", joint, hidden_dim);
  cell.b_reset = params.add_bias(prefix + ".b_reset", hidden_dim);
  cell.w_cand = params.add_weight(prefix + ".W_cand", joint, hidden_dim);
  cell.b_cand = params.add_bias(prefix + ".b_cand", hidden_dim);
  return cell;
}

Var gru_step(Tape& tape, ParameterSet& params, const GruCell& cell, Var x, Var h_prev) {
  require(x.cols() == cell.input_dim && h_prev.cols() == cell.hidden_dim && x.rows() == h_prev.rows(),
          ErrorCode::ShapeMismatch, "gru_step input/hidden shape");
  const Var xh[] = {x, h_prev};
  const Var joint = concat_cols(xh);
  const Var z = sigmoid(dense(joint, tape.parameter(params[cell.w_update]), tape.parameter(params[cell.b_update])));
  const Var r = sigmoid(dense(joint, tape.parameter(params[cell.w_reset]), tape.parameter(params[cell.b_reset])));
  const Var xrh[] = {x, mul(r, h_prev)};
  const Var cand =
      tanh(dense(concat_cols(xrh), tape.parameter(params[cell.w_cand]), tape.parameter(params[cell.b_cand])));
  return add(mul(rsub(1.0, z), h_prev), mul(z, cand));
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ParameterSet& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  require(m_.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state does not match parameter set");
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    require(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols() && m_[i].rows() == p.value.rows() &&
                m_[i].cols() == p.value.cols(),
            ErrorCode::ShapeMismatch, "gradient shape of '" + p.name + "'");
    if (!p.trainable) continue;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    const auto m_hat = m_[i].array() / c1;
    const auto v_hat = v_[i].array() / c2;
    p.value.array() -= config_.lr * m_hat / (v_hat.sqrt() + config_.eps);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'A', 'F', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterSet& params) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    require(p.name.size() <= 0xFFFF, ErrorCode::IOError, "parameter name too long");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(p.dims.size()));
    for (std::uint32_t d : p.dims) put_le<std::uint32_t>(out, d);
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p.value(r, c)));
  }
  require(out.good(), ErrorCode::IOError, "checkpoint write failed");
}

ParameterSet read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  require(in.gcount() == 4 && std::equal(magic, magic + 4, kMagic), ErrorCode::ParseError, "not an AFMT checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  require(version == kVersion, ErrorCode::ParseError, "unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in);
  ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name.resize(get_le<std::uint16_t>(in));
    in.read(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    require(in.good(), ErrorCode::ParseError, "truncated checkpoint");
    const auto ndim = get_le<std::uint8_t>(in);
    require(ndim == 1 || ndim == 2, ErrorCode::ParseError, "parameter rank must be 1 or 2");
    for (std::uint8_t d = 0; d < ndim; ++d) p.dims.push_back(get_le<std::uint32_t>(in));
    const Eigen::Index rows = ndim == 2 ? p.dims[0] : 1;
    const Eigen::Index cols = ndim == 2 ? p.dims[1] : p.dims[0];
    p.value.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) p.value(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(in));
    params.add(std::move(p));
  }
  return params;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IOError, "cannot write " + path);
  write_checkpoint(out, params);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IOError, "cannot open " + path);
  return read_checkpoint(in);
}

std::size_t copy_matching(const ParameterSet& src, ParameterSet& dst) {
  std::size_t copied = 0;
  for (auto& p : dst) {
    const std::size_t i = src.find(p.name);
    if (i == src.size() || src[i].dims != p.dims) continue;
    p.value = src[i].value;
    ++copied;
  }
  return copied;
}

}  // namespace affect::ad
