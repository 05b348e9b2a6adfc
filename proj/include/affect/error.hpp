// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affect {

enum class ErrorCode {
  DimensionMismatch,
  ValueOutOfRange,
  BadMask,
  UnknownClass,
  UnknownAU,
  MissingMask,
  BadDistribution,
  LengthMismatch,
  EmptyRow,
  BatchTooSmall,
  EmptyMaskBatch,
  ShapeMismatch,
  NonScalarRoot,
  InvalidSpec,
  EmptySequence,
  Infeasible,
  ZeroWeightSum,
  NegativeWeight,
  KeyMisalignment,
  EvenWindow,
  EmptyUtterance,
  BadAlpha,
  MissingAUPrediction,
  EmptyDefs,
  DegenerateLandmarks,
  BadRange,
  SignalTooShort,
  ParseError,
  IOError,
  ConfigError,
  DivergedLoss,
  IncompatibleHeads,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the category rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace affect
