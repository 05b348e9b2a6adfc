// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics. Regression metrics take any pair of Eigen vector
// expressions; moments are population (1/N) moments.
#pragma once

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affect/error.hpp"

namespace affect {

/// A metric value plus a flag raised when a documented convention replaced
/// an undefined (0/0) result.
template <typename Scalar>
struct Scored {
  Scalar value{};
  bool degenerate = false;
};

namespace detail {

template <typename DerivedX, typename DerivedY>
void check_series(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y, Eigen::Index min_len) {
  require(x.size() == y.size(), ErrorCode::LengthMismatch,
          "series lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  require(x.size() >= min_len, ErrorCode::BatchTooSmall, "series needs at least " + std::to_string(min_len) + " entries");
}

}  // namespace detail

/// Concordance correlation coefficient 2 s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2).
/// Two constant series with equal means yield 0 with the degenerate flag set.
template <typename DerivedX, typename DerivedY>
Scored<typename DerivedX::Scalar> ccc(const Eigen::MatrixBase<DerivedX>& annotations,
                                      const Eigen::MatrixBase<DerivedY>& predictions) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_series(annotations, predictions, 2);
  const auto n = static_cast<Scalar>(annotations.size());
  const Scalar mx = annotations.sum() / n;
  const Scalar my = predictions.sum() / n;
  const auto dx = (annotations.array() - mx);
  const auto dy = (predictions.array() - my);
  const Scalar sxy = (dx * dy).sum() / n;
  const Scalar sx2 = dx.square().sum() / n;
  const Scalar sy2 = dy.square().sum() / n;
  const Scalar denom = sx2 + sy2 + (mx - my) * (mx - my);
  if (denom == Scalar(0)) return {Scalar(0), true};
  return {Scalar(2) * sxy / denom, false};
}

/// Pearson correlation; 0 with the degenerate flag when either series is constant.
template <typename DerivedX, typename DerivedY>
Scored<typename DerivedX::Scalar> pearson(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_series(x, y, 2);
  const auto dx = (x.array() - x.mean());
  const auto dy = (y.array() - y.mean());
  const Scalar sx = std::sqrt(dx.square().sum());
  const Scalar sy = std::sqrt(dy.square().sum());
  if (sx == Scalar(0) || sy == Scalar(0)) return {Scalar(0), true};
  return {(dx * dy).sum() / (sx * sy), false};
}

template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar mse(const Eigen::MatrixBase<DerivedX>& annotations, const Eigen::MatrixBase<DerivedY>& predictions) {
  detail::check_series(annotations, predictions, 1);
  return (annotations - predictions).squaredNorm() / static_cast<typename DerivedX::Scalar>(annotations.size());
}

/// Median; even lengths average the two middle values. Throws EmptySequence.
double median(std::span<const double> values);

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;

  [[nodiscard]] int classes() const { return static_cast<int>(counts.rows()); }
  [[nodiscard]] long total() const { return counts.sum(); }
};

ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, int num_classes);

/// F1 of the positive class. No positives in either vector is flagged
/// degenerate and scored 1 (vacuous agreement).
Scored<double> f1_binary(std::span<const int> pred, std::span<const int> truth);

/// Unweighted mean of one-vs-rest F1 over K classes.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes);

double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Mean per-class recall. Throws EmptyRow when a class has no true samples.
double mean_diagonal(const ConfusionMatrix& cm);
/// Unweighted average recall; identical to mean_diagonal.
inline double uar(const ConfusionMatrix& cm) { return mean_diagonal(cm); }

/// 0.5 * (macro F1 + accuracy).
double afa(std::span<const int> pred, std::span<const int> truth, int num_classes);

/// 0.67 * F1 + 0.33 * total accuracy.
double e_total_expr(double f1, double total_acc);
/// 0.5 * mean F1 + 0.5 * total accuracy.
double e_total_au(double mean_f1, double total_acc);

/// Flat `name = value` report with 6 decimals, keys in sorted order.
class MetricReport {
 public:
  void set(const std::string& name, double value) { values_[name] = value; }
  void flag(const std::string& name) { flags_.push_back(name); }

  [[nodiscard]] double at(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const { return values_.count(name) != 0; }
  [[nodiscard]] const std::map<std::string, double>& values() const { return values_; }
  [[nodiscard]] const std::vector<std::string>& flags() const { return flags_; }

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static MetricReport read(std::istream& in);

 private:
  std::map<std::string, double> values_;
  std::vector<std::string> flags_;
};

}  // namespace affect
