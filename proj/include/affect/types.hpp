// SPDX-License-Identifier: Apache-2.0
//
// Label-space types shared by every module: valence/arousal, the seven basic
// expressions, the 17-entry action-unit vector with annotation mask, and the
// annotated sample that carries exactly one of those labels.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Core>

namespace affect {

inline constexpr int kNumExpressions = 7;
inline constexpr int kNumAUs = 17;

/// Canonical index order: neutral first, then the basic emotions alphabetically.
enum class Expression : std::uint8_t {
  Neutral = 0,
  Anger = 1,
  Disgust = 2,
  Fear = 3,
  Happiness = 4,
  Sadness = 5,
  Surprise = 6,
};

/// FACS ids of the action units, in vector order.
inline constexpr std::array<int, kNumAUs> kAuIds = {1, 2, 4, 5, 6, 7, 9, 10, 11,
                                                    12, 15, 17, 20, 23, 24, 25, 26};

using ExpressionProbs = Eigen::Matrix<double, kNumExpressions, 1>;
using AuProbs = Eigen::Matrix<double, kNumAUs, 1>;

struct ValenceArousal {
  double valence = 0.0;
  double arousal = 0.0;

  bool operator==(const ValenceArousal&) const = default;
};

/// values[i] only carries meaning where mask[i] == 1.
struct AUVector {
  std::array<std::uint8_t, kNumAUs> values{};
  std::array<std::uint8_t, kNumAUs> mask{};

  bool operator==(const AUVector&) const = default;

  [[nodiscard]] bool active(int au_id) const;
  [[nodiscard]] bool annotated(int au_id) const;
  void set(int au_id, bool value);
};

struct CompoundLabel {
  int class_id = 0;
  Expression emo1 = Expression::Happiness;
  Expression emo2 = Expression::Surprise;
};

enum class Split : std::uint8_t { Train, Val, Test };

using Label = std::variant<ValenceArousal, Expression, AUVector>;

enum class Task : std::uint8_t { VA = 0, EXPR = 1, AU = 2 };

struct AnnotatedSample {
  std::string id;
  Split split = Split::Train;
  std::optional<std::string> sequence_id;
  std::optional<std::string> utterance_id;
  std::optional<int> frame_index;
  Eigen::VectorXd features;
  std::optional<Eigen::VectorXd> audio_features;
  std::optional<Eigen::VectorXd> landmarks;
  Label label;

  [[nodiscard]] Task task() const noexcept { return static_cast<Task>(label.index()); }
};

/// Per-frame model outputs as exchanged through prediction files.
struct PredictionRecord {
  std::string id;
  int frame_index = 0;
  double valence = 0.0;
  double arousal = 0.0;
  ExpressionProbs expr = ExpressionProbs::Constant(1.0 / kNumExpressions);
  AuProbs au = AuProbs::Constant(0.5);
};

std::string_view expression_name(int class_id);
inline std::string_view expression_name(Expression e) { return expression_name(static_cast<int>(e)); }
Expression expression_from_name(std::string_view name);
Expression expression_from_index(int class_id);

/// 0-based position of a FACS AU id in kAuIds; throws UnknownAU otherwise.
int au_index(int au_id);

std::string_view split_name(Split split) noexcept;
Split split_from_name(std::string_view name);
std::string_view task_name(Task task) noexcept;

/// Throws on the first violated invariant. Accepts any sample whose features
/// have length feature_dim.
void validate_sample(const AnnotatedSample& sample, Eigen::Index feature_dim);

}  // namespace affect
