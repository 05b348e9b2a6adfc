// SPDX-License-Identifier: Apache-2.0
#include "affect/relatedness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "affect/error.hpp"

namespace affect {

namespace {

constexpr std::array<Expression, 6> kBasic = {Expression::Anger,     Expression::Disgust, Expression::Fear,
                                              Expression::Happiness, Expression::Sadness, Expression::Surprise};

void check_au(int au_id) { au_index(au_id); }

RelatednessTable build_cognitive() {
  RelatednessTable t;
  t.set_row(Expression::Happiness, {{12, 25}, {{6, 0.51}}});
  t.set_row(Expression::Sadness, {{4, 15}, {{1, 0.6}, {6, 0.5}, {11, 0.26}, {17, 0.67}}});
  t.set_row(Expression::Fear, {{1, 4, 20, 25}, {{2, 0.57}, {5, 0.63}, {26, 0.33}}});
  t.set_row(Expression::Anger, {{4, 7, 24}, {{10, 0.26}, {17, 0.52}, {23, 0.29}}});
  t.set_row(Expression::Surprise, {{1, 2, 25, 26}, {{5, 0.66}}});
  t.set_row(Expression::Disgust, {{9, 10, 17}, {{4, 0.31}, {24, 0.26}}});
  return t;
}

RelatednessTable build_empirical() {
  RelatednessTable t;
  t.set_row(Expression::Happiness, {{}, {{12, 0.82}, {25, 0.7}, {6, 0.57}, {7, 0.83}, {10, 0.63}}});
  // The source row lists "(0.53)" without an id; AU4 matches the cognitive prototype.
  t.set_row(Expression::Sadness, {{}, {{4, 0.53}, {15, 0.42}, {1, 0.31}, {7, 0.13}, {17, 0.1}}});
  t.set_row(Expression::Fear, {{}, {{1, 0.52}, {4, 0.4}, {25, 0.85}, {5, 0.38}, {7, 0.57}, {10, 0.57}}});
  t.set_row(Expression::Anger, {{}, {{4, 0.65}, {7, 0.45}, {25, 0.4}, {10, 0.33}, {9, 0.15}}});
  t.set_row(Expression::Surprise, {{}, {{1, 0.38}, {2, 0.37}, {25, 0.85}, {26, 0.3}, {5, 0.5}, {7, 0.2}}});
  t.set_row(Expression::Disgust, {{}, {{9, 0.21}, {10, 0.85}, {17, 0.23}, {4, 0.6}, {7, 0.75}, {25, 0.8}}});
  return t;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "bad AU id '" + s + "'");
  }
  if (used != s.size()) fail(ErrorCode::ParseError, "bad AU id '" + s + "'");
  return v;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "bad weight '" + s + "'");
  }
  if (used != s.size()) fail(ErrorCode::ParseError, "bad weight '" + s + "'");
  return v;
}

}  // namespace

void RelatednessTable::set_row(Expression emotion, RelatednessRow row) {
  require(emotion != Expression::Neutral, ErrorCode::InvalidSpec, "neutral has no relatedness row");
  std::vector<int> seen;
  for (int id : row.prototypical) {
    check_au(id);
    require(std::find(seen.begin(), seen.end(), id) == seen.end(), ErrorCode::InvalidSpec,
            "AU" + std::to_string(id) + " listed twice");
    seen.push_back(id);
  }
  for (const auto& [id, w] : row.observational) {
    check_au(id);
    require(w > 0.0 && w <= 1.0, ErrorCode::ValueOutOfRange, "observational weight must lie in (0,1]");
    require(std::find(seen.begin(), seen.end(), id) == seen.end(), ErrorCode::InvalidSpec,
            "AU" + std::to_string(id) + " is both prototypical and observational");
    seen.push_back(id);
  }
  rows_[static_cast<std::size_t>(emotion)] = std::move(row);
}

std::vector<WeightedAu> RelatednessTable::weighted_aus(Expression emotion) const {
  const auto& r = row(emotion);
  std::vector<WeightedAu> out;
  out.reserve(r.prototypical.size() + r.observational.size());
  for (int id : r.prototypical) out.push_back({id, 1.0});
  out.insert(out.end(), r.observational.begin(), r.observational.end());
  return out;
}

Eigen::Matrix<double, kNumExpressions, kNumAUs> RelatednessTable::au_given_emotion(bool reweight) const {
  Eigen::Matrix<double, kNumExpressions, kNumAUs> m = Eigen::Matrix<double, kNumExpressions, kNumAUs>::Zero();
  for (int e = 0; e < kNumExpressions; ++e) {
    const auto& r = rows_[e];
    for (int id : r.prototypical) m(e, au_index(id)) = 1.0;
    for (const auto& [id, w] : r.observational) m(e, au_index(id)) = reweight ? w : 1.0;
  }
  return m;
}

const RelatednessTable& cognitive_table() {
  static const RelatednessTable table = build_cognitive();
  return table;
}

const RelatednessTable& empirical_table() {
  static const RelatednessTable table = build_empirical();
  return table;
}

RelatednessTable parse_relatedness(std::istream& in) {
  RelatednessTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string name;
    if (!(fields >> name)) continue;

    RelatednessRow row;
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + field);
      const std::string key = field.substr(0, eq);
      const auto items = split(field.substr(eq + 1), ',');
      if (key == "proto") {
        for (const auto& item : items) row.prototypical.push_back(parse_int(item));
      } else if (key == "obs") {
        for (const auto& item : items) {
          const auto colon = item.find(':');
          if (colon == std::string::npos)
            fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": observational AU needs a weight");
          row.observational.push_back({parse_int(item.substr(0, colon)), parse_double(item.substr(colon + 1))});
        }
      } else {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    }
    table.set_row(expression_from_name(name), std::move(row));
  }
  return table;
}

RelatednessTable load_relatedness(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IOError, "cannot open " + path.string());
  return parse_relatedness(in);
}

void write_relatedness(std::ostream& out, const RelatednessTable& table) {
  for (Expression e : kBasic) {
    const auto& r = table.row(e);
    out << expression_name(e) << " proto=";
    for (std::size_t i = 0; i < r.prototypical.size(); ++i) out << (i ? "," : "") << r.prototypical[i];
    out << " obs=";
    for (std::size_t i = 0; i < r.observational.size(); ++i)
      out << (i ? "," : "") << r.observational[i].au_id << ':' << std::setprecision(17) << r.observational[i].weight;
    out << '\n';
  }
}

RelatednessTable relatedness_by_name(const std::string& name_or_path) {
  if (name_or_path == "cognitive") return cognitive_table();
  if (name_or_path == "empirical") return empirical_table();
  return load_relatedness(name_or_path);
}

std::vector<AuTarget> coannotate_emotion_to_aus(Expression label, const RelatednessTable& table) {
  std::vector<AuTarget> out;
  if (label == Expression::Neutral) return out;
  for (const auto& [id, w] : table.weighted_aus(label)) out.push_back({id, 1, w});
  return out;
}

std::optional<Expression> coannotate_aus_to_emotion(const AUVector& aus, const RelatednessTable& table) {
  std::optional<Expression> best;
  std::size_t best_size = 0;
  for (Expression e : kBasic) {
    const auto required = table.weighted_aus(e);
    if (required.empty()) continue;
    const bool satisfied = std::all_of(required.begin(), required.end(), [&](const WeightedAu& w) {
      return aus.annotated(w.au_id) && aus.active(w.au_id);
    });
    // Strictly-greater keeps the lowest canonical index on equal set sizes.
    if (satisfied && required.size() > best_size) {
      best = e;
      best_size = required.size();
    }
  }
  return best;
}

SoftExpressionLabel soft_coannotate(const AUVector& aus, const RelatednessTable& table, bool reweight) {
  ExpressionProbs scores = ExpressionProbs::Zero();
  for (Expression e : kBasic) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [id, w] : table.weighted_aus(e)) {
      require(aus.annotated(id), ErrorCode::MissingMask, "AU" + std::to_string(id) + " is not annotated");
      const double weight = reweight ? w : 1.0;
      num += weight * (aus.active(id) ? 1.0 : 0.0);
      den += weight;
    }
    if (den > 0.0) scores[static_cast<int>(e)] = num / den;
  }
  const ExpressionProbs exps = (scores.array() - scores.maxCoeff()).exp().matrix();
  return exps / exps.sum();
}

AuProbs emotion_au_mixture(const ExpressionProbs& expr_probs, const RelatednessTable& table, bool reweight) {
  require(expr_probs.allFinite() && (expr_probs.array() >= 0.0).all() && std::abs(expr_probs.sum() - 1.0) <= 1e-6,
          ErrorCode::BadDistribution, "expression probabilities must form a distribution");
  return (expr_probs.transpose() * table.au_given_emotion(reweight)).transpose();
}

}  // namespace affect
