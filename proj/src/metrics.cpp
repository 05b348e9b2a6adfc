// SPDX-License-Identifier: Apache-2.0
#include "affect/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace affect {

namespace {

void check_labels(std::span<const int> pred, std::span<const int> truth) {
  require(pred.size() == truth.size(), ErrorCode::LengthMismatch,
          "label vectors of length " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()));
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

Scored<double> f1_from(const Counts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return {1.0, true};
  if (c.tp == 0) return {0.0, false};
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return {2.0 * precision * recall / (precision + recall), false};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

double median(std::span<const double> values) {
  require(!values.empty(), ErrorCode::EmptySequence, "median of an empty sequence");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  check_labels(pred, truth);
  require(num_classes >= 1, ErrorCode::InvalidSpec, "confusion matrix needs at least one class");
  ConfusionMatrix cm{Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_classes, num_classes)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i] >= 0 && pred[i] < num_classes && truth[i] >= 0 && truth[i] < num_classes,
            ErrorCode::UnknownClass, "label outside [0, K)");
    ++cm.counts(truth[i], pred[i]);
  }
  return cm;
}

Scored<double> f1_binary(std::span<const int> pred, std::span<const int> truth) {
  check_labels(pred, truth);
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  return f1_from(c);
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  const ConfusionMatrix cm = confusion_matrix(pred, truth, num_classes);
  double total = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    Counts c;
    c.tp = cm.counts(k, k);
    c.fp = cm.counts.col(k).sum() - c.tp;
    c.fn = cm.counts.row(k).sum() - c.tp;
    total += f1_from(c).value;
  }
  return total / num_classes;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_labels(pred, truth);
  require(!pred.empty(), ErrorCode::EmptySequence, "accuracy of no samples");
  long hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double mean_diagonal(const ConfusionMatrix& cm) {
  require(cm.classes() > 0, ErrorCode::EmptyRow, "empty confusion matrix");
  double total = 0.0;
  for (int k = 0; k < cm.classes(); ++k) {
    const long row = cm.counts.row(k).sum();
    require(row > 0, ErrorCode::EmptyRow, "class " + std::to_string(k) + " has no true samples");
    total += static_cast<double>(cm.counts(k, k)) / static_cast<double>(row);
  }
  return total / cm.classes();
}

double afa(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  return 0.5 * (macro_f1(pred, truth, num_classes) + accuracy(pred, truth));
}

double e_total_expr(double f1, double total_acc) {
  require(f1 >= 0.0 && f1 <= 1.0 && total_acc >= 0.0 && total_acc <= 1.0, ErrorCode::ValueOutOfRange,
          "metric inputs must lie in [0,1]");
  return 0.67 * f1 + 0.33 * total_acc;
}

double e_total_au(double mean_f1, double total_acc) {
  require(mean_f1 >= 0.0 && mean_f1 <= 1.0 && total_acc >= 0.0 && total_acc <= 1.0, ErrorCode::ValueOutOfRange,
          "metric inputs must lie in [0,1]");
  return 0.5 * mean_f1 + 0.5 * total_acc;
}

double MetricReport::at(const std::string& name) const {
  const auto it = values_.find(name);
  require(it != values_.end(), ErrorCode::ConfigError, "metric '" + name + "' not in report");
  return it->second;
}

void MetricReport::write(std::ostream& out) const {
  char buf[64];
  for (const auto& [name, value] : values_) {
    std::snprintf(buf, sizeof buf, "%.6f", value);
    out << name << " = " << buf << '\n';
  }
  for (const auto& name : flags_) out << "# degenerate: " << name << '\n';
}

void MetricReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  write(out);
}

MetricReport MetricReport::read(std::istream& in) {
  MetricReport report;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# degenerate: ", 0) == 0) {
      report.flag(line.substr(14));
      continue;
    }
    const auto eq = line.find('=');
    if (trim(line).empty() || eq == std::string::npos) continue;
    report.set(trim(line.substr(0, eq)), std::stod(trim(line.substr(eq + 1))));
  }
  return report;
}

}  // namespace affect
