// SPDX-License-Identifier: Apache-2.0
#include "affect/types.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"

namespace affect {

namespace {

constexpr std::array<std::string_view, kNumExpressions> kExpressionNames = {
    "neutral", "anger", "disgust", "fear", "happiness", "sadness", "surprise"};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::BadMask: return "BadMask";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::UnknownAU: return "UnknownAU";
    case ErrorCode::MissingMask: return "MissingMask";
    case ErrorCode::BadDistribution: return "BadDistribution";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyRow: return "EmptyRow";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::EmptyMaskBatch: return "EmptyMaskBatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarRoot: return "NonScalarRoot";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::KeyMisalignment: return "KeyMisalignment";
    case ErrorCode::EvenWindow: return "EvenWindow";
    case ErrorCode::EmptyUtterance: return "EmptyUtterance";
    case ErrorCode::BadAlpha: return "BadAlpha";
    case ErrorCode::MissingAUPrediction: return "MissingAUPrediction";
    case ErrorCode::EmptyDefs: return "EmptyDefs";
    case ErrorCode::DegenerateLandmarks: return "DegenerateLandmarks";
    case ErrorCode::BadRange: return "BadRange";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::IncompatibleHeads: return "IncompatibleHeads";
  }
  return "Unknown";
}

bool AUVector::active(int au_id) const {
  const int i = au_index(au_id);
  return mask[i] != 0 && values[i] != 0;
}

bool AUVector::annotated(int au_id) const { return mask[au_index(au_id)] != 0; }

void AUVector::set(int au_id, bool value) {
  const int i = au_index(au_id);
  mask[i] = 1;
  values[i] = value ? 1 : 0;
}

std::string_view expression_name(int class_id) {
  if (class_id < 0 || class_id >= kNumExpressions)
    fail(ErrorCode::UnknownClass, "expression class " + std::to_string(class_id));
  return kExpressionNames[class_id];
}

Expression expression_from_name(std::string_view name) {
  const auto it = std::find(kExpressionNames.begin(), kExpressionNames.end(), name);
  if (it == kExpressionNames.end()) fail(ErrorCode::UnknownClass, "expression '" + std::string(name) + "'");
  return static_cast<Expression>(it - kExpressionNames.begin());
}

Expression expression_from_index(int class_id) {
  expression_name(class_id);
  return static_cast<Expression>(class_id);
}

int au_index(int au_id) {
  const auto it = std::find(kAuIds.begin(), kAuIds.end(), au_id);
  if (it == kAuIds.end()) fail(ErrorCode::UnknownAU, "AU" + std::to_string(au_id));
  return static_cast<int>(it - kAuIds.begin());
}

std::string_view split_name(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  fail(ErrorCode::ParseError, "unknown split '" + std::string(name) + "'");
}

std::string_view task_name(Task task) noexcept {
  switch (task) {
    case Task::VA: return "VA";
    case Task::EXPR: return "EXPR";
    case Task::AU: return "AU";
  }
  return "VA";
}

void validate_sample(const AnnotatedSample& sample, Eigen::Index feature_dim) {
  require(sample.features.size() == feature_dim, ErrorCode::DimensionMismatch,
          "sample '" + sample.id + "' has " + std::to_string(sample.features.size()) +
              " features, expected " + std::to_string(feature_dim));
  require(sample.features.allFinite(), ErrorCode::ValueOutOfRange, "non-finite feature in '" + sample.id + "'");

  if (const auto* va = std::get_if<ValenceArousal>(&sample.label)) {
    const auto in_range = [](double x) { return std::isfinite(x) && x >= -1.0 && x <= 1.0; };
    require(in_range(va->valence) && in_range(va->arousal), ErrorCode::ValueOutOfRange,
            "valence/arousal outside [-1,1] in '" + sample.id + "'");
  } else if (const auto* expr = std::get_if<Expression>(&sample.label)) {
    expression_name(static_cast<int>(*expr));
  } else {
    const auto& au = std::get<AUVector>(sample.label);
    for (int i = 0; i < kNumAUs; ++i) {
      require(au.mask[i] <= 1 && au.values[i] <= 1, ErrorCode::ValueOutOfRange, "AU entries must be 0/1");
      require(au.mask[i] == 1 || au.values[i] == 0, ErrorCode::BadMask,
              "AU" + std::to_string(kAuIds[i]) + " set without annotation in '" + sample.id + "'");
    }
  }
}

}  // namespace affect
