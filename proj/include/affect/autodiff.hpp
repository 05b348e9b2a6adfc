// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass in creation order, which
// is a topological order of the graph, so backward() simply walks the tape in
// reverse. Parameters live outside the tape; gradients reaching a parameter
// leaf are accumulated into Parameter::grad.
//
//   Tape tape;
//   Var x = tape.constant(input);
//   Var w = tape.parameter(params[0]);
//   Var loss = mean(square(matmul(x, w)));
//   tape.backward(loss);   // params[0].grad now holds d loss / d w
//
// Elementwise binary ops broadcast a 1-sized dimension of either operand.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace affect::ad {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  /// Logical shape for checkpoints: {n} for biases, {rows, cols} for weights.
  std::vector<std::uint32_t> dims;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

class ParameterSet {
 public:
  /// Weight of shape rows x cols; zero until init_params draws it.
  std::size_t add_weight(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  /// Zero bias stored as a 1 x n row.
  std::size_t add_bias(const std::string& name, Eigen::Index n);
  std::size_t add(Parameter p);

  [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  [[nodiscard]] auto begin() { return params_.begin(); }
  [[nodiscard]] auto end() { return params_.end(); }
  [[nodiscard]] auto begin() const { return params_.begin(); }
  [[nodiscard]] auto end() const { return params_.end(); }

  /// Index of the parameter with the given name, or size() when absent.
  [[nodiscard]] std::size_t find(const std::string& name) const;
  [[nodiscard]] Eigen::Index scalar_count() const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

/// sqrt(6 / (fan_in + fan_out)).
double glorot_bound(Eigen::Index fan_in, Eigen::Index fan_out);

/// Redraws every weight uniformly in +-glorot_bound(rows, cols) and zeroes
/// every bias. Parameters are visited in insertion order, so the result is a
/// pure function of (shapes, seed).
void init_params(ParameterSet& params, std::uint64_t seed);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  [[nodiscard]] double scalar() const;
};

class Tape {
 public:
  /// Propagates the node's output gradient into its parents' gradients.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var scalar(double value);
  /// Leaf bound to a parameter; frozen parameters are treated as constants.
  Var parameter(Parameter& p);
  Var record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

  /// Reverse sweep from a 1x1 root; throws NonScalarRoot otherwise.
  void backward(Var root);

  [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  [[nodiscard]] bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Adds g into the gradient of node id (no-op when it needs no gradient).
  void accumulate(std::size_t id, const Matrix& g);
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise, broadcasting.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var shift(Var a, double s);
/// s - a
Var rsub(double s, Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// 1 x cols column sums.
Var col_sum(Var a);
Var col_mean(Var a);
/// rows x 1 row sums.
Var row_sum(Var a);

// Unary.
Var square(Var a);
Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// Clamp with zero gradient outside [lo, hi].
Var clamp(Var a, double lo, double hi);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// Shape.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const Eigen::Index> rows);

/// Inverted dropout: in training mode zeroes each entry with probability p and
/// scales survivors by 1/(1-p). Identity when !train or p == 0.
Var dropout(Var a, double p, bool train, std::mt19937_64& rng);

/// x * W + b with W of shape in x out and b a 1 x out row.
Var dense(Var x, Var w, Var b);

/// Parameter indices of a gated recurrent cell acting on [x, h].
struct GruCell {
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 0;
  std::size_t w_update = 0, b_update = 0;
  std::size_t w_reset = 0, b_reset = 0;
  std::size_t w_cand = 0, b_cand = 0;

  static GruCell create(ParameterSet& params, const std::string& prefix, Eigen::Index input_dim,
                        Eigen::Index hidden_dim);
  [[nodiscard]] static Eigen::Index parameter_count(Eigen::Index input_dim, Eigen::Index hidden_dim) {
    return 3 * ((input_dim + hidden_dim) * hidden_dim + hidden_dim);
  }
};

/// z = sigmoid([x,h] Wz + bz), r = sigmoid([x,h] Wr + br),
/// c = tanh([x, r*h] Wc + bc), h' = (1-z)*h + z*c.
Var gru_step(Tape& tape, ParameterSet& params, const GruCell& cell, Var x, Var h_prev);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam with per-parameter moment accumulators.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from each trainable parameter's grad.
  void step(ParameterSet& params);

  [[nodiscard]] const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.lr = lr; }
  [[nodiscard]] long steps() const noexcept { return step_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long step_ = 0;
};

/// Binary checkpoint: "AFMT", u32 version, u32 count, then per entry u16 name
/// length, name bytes, u8 ndim, u32 dims, little-endian f64 values (row-major).
void write_checkpoint(std::ostream& out, const ParameterSet& params);
ParameterSet read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

/// Copies every parameter of src whose name and shape match into dst; returns the count.
std::size_t copy_matching(const ParameterSet& src, ParameterSet& dst);

}  // namespace affect::ad
