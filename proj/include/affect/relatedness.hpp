// SPDX-License-Identifier: Apache-2.0
//
// Emotion <-> action-unit relatedness tables and the three coupling engines
// built on them: hard co-annotation (both directions), soft co-annotation and
// the emotion->AU mixture used by distribution matching.
//
// Neutral has no row: it maps to the empty AU set, scores 0 under soft
// co-annotation and contributes nothing to mixtures.
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affect/types.hpp"

namespace affect {

struct WeightedAu {
  int au_id = 0;
  double weight = 1.0;

  bool operator==(const WeightedAu&) const = default;
};

struct RelatednessRow {
  std::vector<int> prototypical;
  std::vector<WeightedAu> observational;
};

class RelatednessTable {
 public:
  RelatednessTable() = default;

  /// Replaces the row of a basic emotion after checking the table invariants.
  void set_row(Expression emotion, RelatednessRow row);

  [[nodiscard]] const RelatednessRow& row(Expression emotion) const {
    return rows_[static_cast<std::size_t>(emotion)];
  }

  /// Prototypical AUs (weight 1) followed by observational AUs with their weights.
  [[nodiscard]] std::vector<WeightedAu> weighted_aus(Expression emotion) const;

  /// p(AU_i | emotion) as a 7x17 matrix: membership 1 (or w for observational
  /// AUs when reweight is set), 0 elsewhere; the neutral row is all zeros.
  [[nodiscard]] Eigen::Matrix<double, kNumExpressions, kNumAUs> au_given_emotion(bool reweight) const;

 private:
  std::array<RelatednessRow, kNumExpressions> rows_{};
};

/// Prototypical/observational sets from the cognitive study.
const RelatednessTable& cognitive_table();
/// Empirical activation rates; every AU is stored as a weighted (observational) entry.
const RelatednessTable& empirical_table();

/// Line format: `<emotion_name> proto=<id,...> obs=<id:w,...>`, `#` starts a comment.
RelatednessTable parse_relatedness(std::istream& in);
RelatednessTable load_relatedness(const std::filesystem::path& path);
void write_relatedness(std::ostream& out, const RelatednessTable& table);

/// Resolves "cognitive", "empirical" or a file path.
RelatednessTable relatedness_by_name(const std::string& name_or_path);

struct AuTarget {
  int au_id = 0;
  int target = 1;
  double weight = 1.0;

  bool operator==(const AuTarget&) const = default;
};

/// AU targets implied by an expression label; empty for neutral.
std::vector<AuTarget> coannotate_emotion_to_aus(Expression label, const RelatednessTable& table);

/// The emotion whose complete AU set is active. Ties go to the larger set,
/// then to the lower canonical index. Emotions with an unannotated required
/// AU are skipped.
std::optional<Expression> coannotate_aus_to_emotion(const AUVector& aus, const RelatednessTable& table);

using SoftExpressionLabel = ExpressionProbs;

/// Softmax over per-emotion weighted activation scores. Throws MissingMask
/// when any AU referenced by the table is unannotated.
SoftExpressionLabel soft_coannotate(const AUVector& aus, const RelatednessTable& table, bool reweight);

/// q = sum_e p(e) p(AU | e). Throws BadDistribution unless expr_probs is a
/// distribution to within 1e-6.
AuProbs emotion_au_mixture(const ExpressionProbs& expr_probs, const RelatednessTable& table, bool reweight);

}  // namespace affect
