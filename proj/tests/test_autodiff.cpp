#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "affect/autodiff.hpp"
#include "support.hpp"

using namespace affect;
using namespace affect::ad;
using affect::test::code_of;

namespace {

using Builder = std::function<Var(Tape&, Var)>;

/// Largest |analytic - numeric| / max(|a|, |n|, 1e-4) over every entry of x.
double max_fd_error(const Matrix& x0, const Builder& build) {
  Parameter p{"x", {}, x0, Matrix::Zero(x0.rows(), x0.cols()), true};
  {
    Tape tape;
    tape.backward(build(tape, tape.parameter(p)));
  }
  const Matrix analytic = p.grad;
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    auto eval = [&](double delta) {
      Parameter q{"x", {}, x0, Matrix::Zero(x0.rows(), x0.cols()), true};
      q.value.data()[i] += delta;
      Tape tape;
      return build(tape, tape.parameter(q)).scalar();
    };
    const double numeric = (eval(h) - eval(-h)) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4}));
  }
  return worst;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Var probe(Tape& tape, Var y) { return sum(mul(y, tape.constant(random_matrix(y.rows(), y.cols(), 99)))); }

}  // namespace

TEST(Autodiff, BackwardExamples) {
  Parameter x{"x", {3}, Matrix::Constant(1, 3, 2.0), Matrix::Zero(1, 3), true};
  {
    Tape tape;
    tape.backward(sum(tape.parameter(x)));
  }
  EXPECT_TRUE(x.grad.isApprox(Matrix::Ones(1, 3)));

  Parameter a{"a", {1}, Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1), true};
  Parameter b{"b", {1}, Matrix::Constant(1, 1, 3.0), Matrix::Zero(1, 1), true};
  Tape tape;
  tape.backward(mul(tape.parameter(a), tape.parameter(b)));
  EXPECT_EQ(a.grad(0, 0), 3.0);
  EXPECT_EQ(b.grad(0, 0), 2.0);
}

TEST(Autodiff, NonScalarRoot) {
  Tape tape;
  Var v = tape.constant(Matrix::Ones(2, 2));
  EXPECT_EQ(code_of([&] { tape.backward(v); }), ErrorCode::NonScalarRoot);
}

TEST(Autodiff, ShapeMismatch) {
  Tape tape;
  Var a = tape.constant(Matrix::Ones(2, 3));
  Var b = tape.constant(Matrix::Ones(2, 2));
  EXPECT_EQ(code_of([&] { matmul(b, a.tape->constant(Matrix::Ones(3, 3))); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { add(a, b); }), ErrorCode::ShapeMismatch);
}

TEST(Autodiff, ForwardExamples) {
  Tape tape;
  const Matrix x = random_matrix(3, 4, 1);
  Var dense_out = dense(tape.constant(x), tape.constant(Matrix::Identity(4, 4)), tape.constant(Matrix::Zero(1, 4)));
  EXPECT_EQ(dense_out.value(), x);

  Var sm = softmax_rows(tape.constant(Matrix::Constant(2, 7, 0.3)));
  for (Eigen::Index i = 0; i < sm.value().size(); ++i) EXPECT_NEAR(sm.value().data()[i], 1.0 / 7.0, 1e-15);

  Var big = softmax_rows(tape.constant(random_matrix(5, 7, 2, -30, 30)));
  for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(big.value().row(r).sum(), 1.0, 1e-12);
}

TEST(Autodiff, GruZeroWeightsAndBounds) {
  ParameterSet params;
  const GruCell cell = GruCell::create(params, "g", 3, 4);
  Tape tape;
  Var h = gru_step(tape, params, cell, tape.constant(random_matrix(2, 3, 4)), tape.constant(Matrix::Zero(2, 4)));
  EXPECT_TRUE(h.value().isZero(0.0));

  init_params(params, 7);
  Var state = tape.constant(Matrix::Zero(2, 4));
  for (int t = 0; t < 20; ++t)
    state = gru_step(tape, params, cell, tape.constant(random_matrix(2, 3, 100 + t, -5, 5)), state);
  EXPECT_LT(state.value().cwiseAbs().maxCoeff(), 1.0);
}

TEST(Autodiff, GruMatchesHandComputation) {
  ParameterSet params;
  const GruCell cell = GruCell::create(params, "g", 2, 2);
  init_params(params, 3);
  const Matrix x = random_matrix(1, 2, 5), h0 = random_matrix(1, 2, 6);
  Tape tape;
  const Matrix got = gru_step(tape, params, cell, tape.constant(x), tape.constant(h0)).value();

  auto sig = [](const Eigen::ArrayXXd& v) { return Eigen::ArrayXXd(1.0 / (1.0 + (-v).exp())); };
  Matrix xh(1, 4);
  xh << x, h0;
  const Eigen::ArrayXXd z = sig((xh * params[cell.w_update].value + params[cell.b_update].value).array());
  const Eigen::ArrayXXd r = sig((xh * params[cell.w_reset].value + params[cell.b_reset].value).array());
  Matrix xrh(1, 4);
  xrh << x, (r * h0.array()).matrix();
  const Eigen::ArrayXXd c = (xrh * params[cell.w_cand].value + params[cell.b_cand].value).array().tanh();
  const Matrix want = ((1 - z) * h0.array() + z * c).matrix();
  EXPECT_TRUE(got.isApprox(want, 1e-14));
}

TEST(Autodiff, DropoutIdentityModes) {
  std::mt19937_64 rng(1);
  Tape tape;
  Var x = tape.constant(random_matrix(4, 5, 8));
  EXPECT_EQ(dropout(x, 0.5, false, rng).value(), x.value());
  EXPECT_EQ(dropout(x, 0.0, true, rng).value(), x.value());
  const Matrix y = dropout(x, 0.5, true, rng).value();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    EXPECT_TRUE(y.data()[i] == 0.0 || std::abs(y.data()[i] - 2.0 * x.value().data()[i]) < 1e-15);
}

TEST(Autodiff, OpGradientsMatchFiniteDifferences) {
  const Matrix x = random_matrix(3, 4, 21);
  const Matrix w = random_matrix(4, 5, 22);
  const Matrix pos = random_matrix(3, 4, 23, 0.2, 2.0);
  const std::vector<std::pair<std::string, Builder>> cases = {
      {"add", [&](Tape& t, Var v) { return probe(t, add(v, t.constant(w.topRows(3).leftCols(4)))); }},
      {"broadcast_add", [&](Tape& t, Var v) { return probe(t, add(t.constant(x), col_mean(v))); }},
      {"sub", [&](Tape& t, Var v) { return probe(t, sub(t.constant(x), v)); }},
      {"mul", [&](Tape& t, Var v) { return probe(t, mul(v, v)); }},
      {"div", [&](Tape& t, Var v) { return probe(t, div(t.constant(x), shift(square(v), 0.5))); }},
      {"matmul", [&](Tape& t, Var v) { return probe(t, matmul(v, t.constant(w))); }},
      {"sum_mean", [&](Tape& t, Var v) { return add(sum(square(v)), mean(v)); }},
      {"col_row", [&](Tape& t, Var v) { return add(probe(t, col_mean(v)), probe(t, row_sum(square(v)))); }},
      {"exp_log", [&](Tape& t, Var v) { return probe(t, log(shift(exp(v), 0.1))); }},
      {"tanh", [&](Tape& t, Var v) { return probe(t, tanh(v)); }},
      {"sigmoid", [&](Tape& t, Var v) { return probe(t, sigmoid(v)); }},
      {"relu", [&](Tape& t, Var v) { return probe(t, relu(v)); }},
      {"softmax", [&](Tape& t, Var v) { return probe(t, softmax_rows(v)); }},
      {"log_softmax", [&](Tape& t, Var v) { return probe(t, log_softmax_rows(v)); }},
      {"rsub_scale", [&](Tape& t, Var v) { return probe(t, rsub(1.0, scale(v, 3.0))); }},
      {"concat_slice", [&](Tape& t, Var v) {
         const Var parts[] = {v, square(v)};
         return probe(t, slice_cols(concat_cols(parts), 2, 5));
       }},
      {"concat_rows_gather", [&](Tape& t, Var v) {
         const Var parts[] = {v, tanh(v)};
         const Eigen::Index rows[] = {5, 0, 0, 2};
         return probe(t, gather_rows(concat_rows(parts), rows));
       }},
  };
  for (const auto& [name, build] : cases) EXPECT_LT(max_fd_error(name == "div" ? pos : x, build), 1e-6) << name;
}

TEST(Autodiff, BackwardIsDeterministic) {
  ParameterSet params;
  const GruCell cell = GruCell::create(params, "g", 3, 3);
  init_params(params, 4);
  std::vector<Matrix> first;
  for (int run = 0; run < 2; ++run) {
    params.zero_grad();
    Tape tape;
    Var h = tape.constant(Matrix::Zero(2, 3));
    for (int t = 0; t < 4; ++t) h = gru_step(tape, params, cell, tape.constant(random_matrix(2, 3, t)), h);
    tape.backward(sum(square(h)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (run == 0)
        first.push_back(params[i].grad);
      else
        EXPECT_EQ(params[i].grad, first[i]);
    }
  }
}

TEST(Autodiff, FrozenParameterGetsNoGradient) {
  Parameter p{"w", {2}, Matrix::Ones(1, 2), Matrix::Zero(1, 2), false};
  Tape tape;
  tape.backward(sum(square(tape.parameter(p))));
  EXPECT_TRUE(p.grad.isZero(0.0));
}

TEST(Init, GlorotBoundsAndSeeds) {
  EXPECT_NEAR(glorot_bound(4, 4), std::sqrt(6.0 / 8.0), 1e-15);
  EXPECT_NEAR(glorot_bound(4, 4), 0.866, 5e-4);

  auto make = [](std::uint64_t seed) {
    ParameterSet p;
    p.add_weight("w", 4, 4);
    p.add_bias("b", 4);
    p.add_weight("v", 30, 10);
    init_params(p, seed);
    return p;
  };
  const ParameterSet a = make(1), b = make(1), c = make(2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
  EXPECT_NE(a[0].value, c[0].value);
  EXPECT_TRUE(a[1].value.isZero(0.0));
  EXPECT_LE(a[0].value.cwiseAbs().maxCoeff(), glorot_bound(4, 4));
  EXPECT_LE(a[2].value.cwiseAbs().maxCoeff(), glorot_bound(30, 10));
  // 300 uniform draws should reach well past half the bound.
  EXPECT_GT(a[2].value.cwiseAbs().maxCoeff(), 0.5 * glorot_bound(30, 10));
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet p;
  p.add_weight("w", 2, 2);
  init_params(p, 1);
  const Matrix before = p[0].value;
  Adam adam({0.1});
  adam.step(p);
  EXPECT_EQ(p[0].value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet p;
  p.add_weight("w", 1, 3);
  p[0].grad << 0.3, -2.0, 1e-3;
  Adam adam({0.01});
  adam.step(p);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(p[0].value(0, i)), 0.01, 1e-6);
  EXPECT_LT(p[0].value(0, 0), 0.0);
  EXPECT_GT(p[0].value(0, 1), 0.0);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ParameterSet p;
  p.add_weight("w", 1, 1);
  p[0].value(0, 0) = 0.5;
  Adam adam({0.05, 0.8, 0.9, 1e-6});
  double w = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 10; ++t) {
    const double g = std::sin(t) + w;
    p[0].grad(0, 0) = g;
    adam.step(p);
    m = 0.8 * m + 0.2 * g;
    v = 0.9 * v + 0.1 * g * g;
    w -= 0.05 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.9, t))) + 1e-6);
    EXPECT_NEAR(p[0].value(0, 0), w, 1e-14);
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  ParameterSet p;
  p.add_weight("w", 1, 1);
  Adam adam({0.1});
  for (int i = 0; i < 100; ++i) {
    p.zero_grad();
    Tape tape;
    tape.backward(square(shift(tape.parameter(p[0]), -3.0)));
    adam.step(p);
  }
  EXPECT_NEAR(p[0].value(0, 0), 3.0, 0.1);
}

TEST(Checkpoint, ByteExactRoundTrip) {
  ParameterSet p;
  p.add_weight("layer.W", 3, 2);
  p.add_bias("layer.b", 2);
  init_params(p, 12);
  p[1].value << -0.0, std::nextafter(1.0, 2.0);

  std::stringstream first;
  write_checkpoint(first, p);
  const std::string bytes = first.str();
  EXPECT_EQ(bytes.substr(0, 4), "AFMT");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x02\x00\x00\x00", 4));
  // Two entries: 2+7 name, 1 rank, 8 dims, 48 data; 2+7, 1, 4, 16.
  EXPECT_EQ(bytes.size(), 12u + (2 + 7 + 1 + 8 + 48) + (2 + 7 + 1 + 4 + 16));

  std::istringstream in(bytes);
  const ParameterSet back = read_checkpoint(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].name, "layer.W");
  EXPECT_EQ(back[0].dims, (std::vector<std::uint32_t>{3, 2}));
  EXPECT_EQ(back[1].dims, (std::vector<std::uint32_t>{2}));
  EXPECT_TRUE(std::signbit(back[1].value(0, 0)));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(back[i].value, p[i].value);
  std::stringstream second;
  write_checkpoint(second, back);
  EXPECT_EQ(second.str(), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::istringstream bad_magic("XXXX");
  EXPECT_EQ(code_of([&] { read_checkpoint(bad_magic); }), ErrorCode::ParseError);
  ParameterSet p;
  p.add_bias("b", 3);
  std::stringstream ss;
  write_checkpoint(ss, p);
  std::string bytes = ss.str();
  bytes.pop_back();
  std::istringstream truncated(bytes);
  EXPECT_EQ(code_of([&] { read_checkpoint(truncated); }), ErrorCode::ParseError);
}

TEST(Checkpoint, CopyMatching) {
  ParameterSet src, dst;
  src.add_weight("a", 2, 2);
  src.add_weight("b", 2, 3);
  init_params(src, 1);
  dst.add_weight("a", 2, 2);
  dst.add_weight("b", 3, 3);
  dst.add_weight("c", 1, 1);
  EXPECT_EQ(copy_matching(src, dst), 1u);
  EXPECT_EQ(dst[0].value, src[0].value);
  EXPECT_TRUE(dst[1].value.isZero(0.0));
}
