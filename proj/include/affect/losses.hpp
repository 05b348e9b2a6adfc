// SPDX-License-Identifier: Apache-2.0
//
// Training objectives as differentiable graph nodes. Every probability that
// enters a log is clamped to [kProbEps, 1 - kProbEps] right after the
// sigmoid/softmax (or mixture) that produced it.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "affect/autodiff.hpp"
#include "affect/relatedness.hpp"
#include "affect/types.hpp"

namespace affect {

inline constexpr double kProbEps = 1e-7;

struct LossWeights {
  double lambda1 = 1.0;  // AU term
  double lambda2 = 1.0;  // VA term
};

/// 1 - 0.5 (ccc_valence + ccc_arousal), computed over the N rows of the batch.
/// Column 0 is valence, column 1 arousal. Throws BatchTooSmall for N < 2.
ad::Var ccc_loss(ad::Var pred_va, const Eigen::MatrixXd& truth_va);

/// Mean of -log softmax(logits)[truth] over rows.
ad::Var cce_loss(ad::Var expr_logits, std::span<const int> truth);

/// Per row -(sum w)^-1 sum_i w_i [t_i log p_i + (1 - t_i) log(1 - p_i)] with
/// p = sigmoid(logit), averaged over rows whose weights are not all zero.
/// Binary weights are the annotation mask; co-annotated rows may carry
/// fractional weights. Throws EmptyMaskBatch when every row is empty.
ad::Var masked_bce_loss(ad::Var au_logits, const Eigen::MatrixXd& targets, const Eigen::MatrixXd& weights);
ad::Var masked_bce_loss(ad::Var au_logits, std::span<const AUVector> truth);

/// Mean over rows of sum_i -p(AU_i|x) log q(AU_i|x), where q is the emotion
/// mixture of expr_probs through the relatedness table.
ad::Var distribution_matching_loss(ad::Var expr_probs, ad::Var au_probs, const RelatednessTable& table,
                                   bool reweight);

/// Mean over rows of sum_k -soft_k log p_k.
ad::Var soft_target_cce(ad::Var expr_probs, const Eigen::MatrixXd& soft_labels);

/// L_emo + lambda1 L_au + lambda2 L_va; absent terms contribute 0.
ad::Var multitask_sum(ad::Tape& tape, std::optional<ad::Var> emo, std::optional<ad::Var> au,
                      std::optional<ad::Var> va, const LossWeights& weights);

/// Per-frame head outputs of a model; heads the model lacks stay empty.
struct BatchPredictions {
  std::optional<ad::Var> va;           // N x 2, linear
  std::optional<ad::Var> expr_logits;  // N x 7
  std::optional<ad::Var> expr_probs;   // softmax of expr_logits
  std::optional<ad::Var> au_logits;    // N x 17
  std::optional<ad::Var> au_probs;     // sigmoid of au_logits

  [[nodiscard]] Eigen::Index rows() const;
};

/// Row indices of the batch that carry each label type, with their targets.
struct BatchLabels {
  std::vector<Eigen::Index> va_rows;
  Eigen::MatrixXd va_truth;  // |va_rows| x 2

  std::vector<Eigen::Index> expr_rows;
  std::vector<int> expr_truth;

  std::vector<Eigen::Index> au_rows;
  Eigen::MatrixXd au_targets;  // |au_rows| x 17
  Eigen::MatrixXd au_weights;  // |au_rows| x 17

  void add_va(Eigen::Index row, const ValenceArousal& va);
  void add_expr(Eigen::Index row, Expression e);
  void add_au(Eigen::Index row, const AUVector& au);
  /// AU targets with explicit per-AU weights (co-annotation).
  void add_au(Eigen::Index row, const Eigen::Matrix<double, 1, kNumAUs>& targets,
              const Eigen::Matrix<double, 1, kNumAUs>& weights);
};

struct MultitaskLoss {
  ad::Var total;
  std::optional<double> emo, au, va;
};

/// Applies each task term only over the rows carrying that label type.
MultitaskLoss multitask_loss(const BatchPredictions& batch, const BatchLabels& labels, const LossWeights& weights);

}  // namespace affect
