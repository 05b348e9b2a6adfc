// SPDX-License-Identifier: Apache-2.0
#include "affect/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "affect/error.hpp"

namespace affect {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<WeightedAu> union_of_rows(Expression a, Expression b, const RelatednessTable& table) {
  std::vector<WeightedAu> out;
  for (Expression e : {a, b}) {
    for (const auto& wa : table.weighted_aus(e)) {
      auto it = std::find_if(out.begin(), out.end(), [&](const WeightedAu& x) { return x.au_id == wa.au_id; });
      if (it == out.end()) {
        out.push_back(wa);
      } else {
        it->weight = std::max(it->weight, wa.weight);
      }
    }
  }
  return out;
}

}  // namespace

void validate(const CompoundClassDef& def) {
  require(def.emo1 != Expression::Neutral && def.emo2 != Expression::Neutral, ErrorCode::InvalidSpec,
          "compound '" + def.name + "' uses neutral as a constituent");
  require(def.emo1 != def.emo2, ErrorCode::InvalidSpec, "compound '" + def.name + "' needs two distinct emotions");
  require(!def.au_set.empty(), ErrorCode::InvalidSpec, "compound '" + def.name + "' has an empty AU set");
  for (const auto& wa : def.au_set) {
    au_index(wa.au_id);
    require(wa.weight > 0.0 && std::isfinite(wa.weight), ErrorCode::InvalidSpec,
            "compound '" + def.name + "' has a non-positive AU weight");
  }
}

double valence_bonus(double valence) {
  if (valence > 0.0) return 1.0;
  if (valence < 0.0) return 0.0;
  return 0.5;
}

double candidate_score(const CompoundClassDef& def, const PredictionRecord& pred) {
  double weighted = 0.0, total = 0.0;
  for (const auto& wa : def.au_set) {
    const double p = pred.au[au_index(wa.au_id)];
    require(std::isfinite(p), ErrorCode::MissingAUPrediction,
            "no prediction for AU" + std::to_string(wa.au_id) + " of '" + pred.id + "'");
    weighted += wa.weight * p;
    total += wa.weight;
  }
  double score = weighted / total + pred.expr[static_cast<int>(def.emo1)] + pred.expr[static_cast<int>(def.emo2)];
  if (def.valence_bonus) score += valence_bonus(pred.valence);
  return score;
}

std::size_t classify_compound_index(std::span<const CompoundClassDef> defs, const PredictionRecord& pred) {
  require(!defs.empty(), ErrorCode::EmptyDefs, "no compound definitions");
  std::size_t best = 0;
  double best_score = candidate_score(defs[0], pred);
  for (std::size_t i = 1; i < defs.size(); ++i) {
    const double s = candidate_score(defs[i], pred);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

const CompoundClassDef& classify_compound(std::span<const CompoundClassDef> defs, const PredictionRecord& pred) {
  return defs[classify_compound_index(defs, pred)];
}

std::vector<CompoundClassDef> default_compound_defs(const RelatednessTable& table) {
  using E = Expression;
  struct Pair {
    const char* name;
    E a, b;
    bool bonus;
  };
  static constexpr Pair kPairs[] = {
      {"happily_surprised", E::Happiness, E::Surprise, true},
      {"happily_disgusted", E::Happiness, E::Disgust, true},
      {"sadly_fearful", E::Sadness, E::Fear, false},
      {"sadly_angry", E::Sadness, E::Anger, false},
      {"sadly_surprised", E::Sadness, E::Surprise, false},
      {"sadly_disgusted", E::Sadness, E::Disgust, false},
      {"fearfully_angry", E::Fear, E::Anger, false},
      {"fearfully_surprised", E::Fear, E::Surprise, false},
      {"angrily_surprised", E::Anger, E::Surprise, false},
      {"angrily_disgusted", E::Anger, E::Disgust, false},
      {"disgustedly_surprised", E::Disgust, E::Surprise, false},
  };
  std::vector<CompoundClassDef> defs;
  for (const auto& p : kPairs) {
    CompoundClassDef def{p.name, p.a, p.b, union_of_rows(p.a, p.b, table), p.bonus};
    validate(def);
    defs.push_back(std::move(def));
  }
  return defs;
}

std::vector<CompoundClassDef> parse_compound_defs(std::istream& in, const RelatednessTable& table) {
  std::vector<CompoundClassDef> defs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    const std::string where = "compound defs line " + std::to_string(line_no);
    require(fields.size() >= 4, ErrorCode::ParseError, where + ": expected name, emo1, emo2, bonus_flag");
    if (fields[0] == "name") continue;
    CompoundClassDef def;
    def.name = fields[0];
    def.emo1 = expression_from_name(fields[1]);
    def.emo2 = expression_from_name(fields[2]);
    require(fields[3] == "0" || fields[3] == "1", ErrorCode::ParseError, where + ": bonus_flag must be 0 or 1");
    def.valence_bonus = fields[3] == "1";
    for (std::size_t i = 4; i < fields.size(); ++i) {
      const auto colon = fields[i].find(':');
      require(colon != std::string::npos, ErrorCode::ParseError, where + ": AU entries are au:w");
      try {
        def.au_set.push_back({std::stoi(fields[i].substr(0, colon)), std::stod(fields[i].substr(colon + 1))});
      } catch (const std::logic_error&) {
        fail(ErrorCode::ParseError, where + ": bad AU entry '" + fields[i] + "'");
      }
    }
    if (def.au_set.empty()) def.au_set = union_of_rows(def.emo1, def.emo2, table);
    validate(def);
    defs.push_back(std::move(def));
  }
  return defs;
}

std::vector<CompoundClassDef> load_compound_defs(const std::filesystem::path& path, const RelatednessTable& table) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IOError, "cannot open " + path.string());
  return parse_compound_defs(in, table);
}

}  // namespace affect
