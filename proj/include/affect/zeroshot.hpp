// SPDX-License-Identifier: Apache-2.0
//
// Zero-shot compound-expression classification from the outputs of a
// multi-task model: each compound class is scored from its constituent
// emotions, its AU set and (for the positive classes) the valence sign.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "affect/relatedness.hpp"
#include "affect/types.hpp"

namespace affect {

struct CompoundClassDef {
  std::string name;
  Expression emo1 = Expression::Happiness;
  Expression emo2 = Expression::Surprise;
  std::vector<WeightedAu> au_set;
  bool valence_bonus = false;
};

/// Throws InvalidSpec unless the constituents are distinct basic emotions and
/// the AU set is non-empty with positive weights.
void validate(const CompoundClassDef& def);

/// 0.5 (sign(v) + 1): 1 for v > 0, 0 for v < 0, 0.5 at v == 0.
double valence_bonus(double valence);

/// Weighted mean of p(AU_k) over the class's AU set, plus p(emo1) + p(emo2),
/// plus the valence bonus when the class carries one. Throws
/// MissingAUPrediction if a needed AU probability is not finite.
double candidate_score(const CompoundClassDef& def, const PredictionRecord& pred);

/// Index of the highest-scoring definition; the first one wins ties.
std::size_t classify_compound_index(std::span<const CompoundClassDef> defs, const PredictionRecord& pred);
const CompoundClassDef& classify_compound(std::span<const CompoundClassDef> defs, const PredictionRecord& pred);

/// The eleven two-emotion compound classes. AU sets are the union of the
/// constituents' rows (maximum weight on overlap); happily surprised and
/// happily disgusted carry the valence bonus.
std::vector<CompoundClassDef> default_compound_defs(const RelatednessTable& table = cognitive_table());

/// Lines `name, emo1, emo2, bonus_flag[, au:w, ...]`. Without AU entries the
/// set is derived from the table as in default_compound_defs.
std::vector<CompoundClassDef> parse_compound_defs(std::istream& in, const RelatednessTable& table = cognitive_table());
std::vector<CompoundClassDef> load_compound_defs(const std::filesystem::path& path,
                                                 const RelatednessTable& table = cognitive_table());

}  // namespace affect
