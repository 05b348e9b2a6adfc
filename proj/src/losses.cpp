// SPDX-License-Identifier: Apache-2.0
#include "affect/losses.hpp"

#include <cmath>

#include "affect/error.hpp"

namespace affect {

using ad::Matrix;
using ad::Var;

namespace {

void check_distribution_rows(const Matrix& p, const char* what) {
  require(p.allFinite() && (p.array() >= 0.0).all(), ErrorCode::BadDistribution, std::string(what) + " has negative or non-finite entries");
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    require(std::abs(p.row(r).sum() - 1.0) <= 1e-6, ErrorCode::BadDistribution,
            std::string(what) + " row " + std::to_string(r) + " does not sum to 1");
}

Matrix one_hot(std::span<const int> truth, Eigen::Index classes) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(truth.size()), classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && truth[i] < classes, ErrorCode::UnknownClass, "class index " + std::to_string(truth[i]));
    m(static_cast<Eigen::Index>(i), truth[i]) = 1.0;
  }
  return m;
}

Var clamped_log(Var p) { return ad::log(ad::clamp(p, kProbEps, 1.0 - kProbEps)); }

}  // namespace

Var ccc_loss(Var pred_va, const Eigen::MatrixXd& truth_va) {
  require(pred_va.cols() == 2 && truth_va.cols() == 2 && pred_va.rows() == truth_va.rows(), ErrorCode::ShapeMismatch,
          "ccc_loss expects matching N x 2 inputs");
  require(pred_va.rows() >= 2, ErrorCode::BatchTooSmall, "CCC needs at least two frames");
  ad::Tape& tape = *pred_va.tape;
  const auto n = static_cast<double>(truth_va.rows());

  const Eigen::RowVector2d truth_mean = truth_va.colwise().mean();
  const Matrix truth_centered = truth_va.rowwise() - truth_mean;
  const Eigen::RowVector2d truth_var = truth_centered.colwise().squaredNorm() / n;

  const Var pred_mean = ad::col_mean(pred_va);
  const Var pred_centered = ad::sub(pred_va, pred_mean);
  const Var covariance = ad::col_mean(ad::mul(pred_centered, tape.constant(truth_centered)));
  const Var pred_var = ad::col_mean(ad::square(pred_centered));
  const Var mean_gap = ad::square(ad::sub(pred_mean, tape.constant(truth_mean)));
  const Var denom = ad::add(ad::add(pred_var, tape.constant(truth_var)), mean_gap);
  const Var concordance = ad::div(ad::scale(covariance, 2.0), denom);
  return ad::rsub(1.0, ad::scale(ad::sum(concordance), 0.5));
}

Var cce_loss(Var expr_logits, std::span<const int> truth) {
  require(expr_logits.rows() == static_cast<Eigen::Index>(truth.size()) && !truth.empty(), ErrorCode::ShapeMismatch,
          "cce_loss expects one label per logit row");
  require(expr_logits.value().allFinite(), ErrorCode::ValueOutOfRange, "non-finite logits");
  const Var picked = ad::mul(ad::log_softmax_rows(expr_logits), expr_logits.tape->constant(one_hot(truth, expr_logits.cols())));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(truth.size()));
}

Var masked_bce_loss(Var au_logits, const Eigen::MatrixXd& targets, const Eigen::MatrixXd& weights) {
  require(targets.rows() == au_logits.rows() && targets.cols() == au_logits.cols() && weights.rows() == targets.rows() &&
              weights.cols() == targets.cols(),
          ErrorCode::ShapeMismatch, "masked_bce_loss shapes");
  require((weights.array() >= 0.0).all(), ErrorCode::ValueOutOfRange, "negative AU weight");
  // Row r contributes weights(r, :) / (sum_r * rows_used) so the sum below is
  // the per-row normalized mean.
  Matrix coeff = Matrix::Zero(weights.rows(), weights.cols());
  Eigen::Index used = 0;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) used += weights.row(r).sum() > 0.0;
  require(used > 0, ErrorCode::EmptyMaskBatch, "no AU annotations in batch");
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    const double total = weights.row(r).sum();
    if (total > 0.0) coeff.row(r) = weights.row(r) / (total * static_cast<double>(used));
  }
  ad::Tape& tape = *au_logits.tape;
  const Var p = ad::sigmoid(au_logits);
  const Var t = tape.constant(targets);
  const Var log_likelihood = ad::add(ad::mul(t, clamped_log(p)), ad::mul(ad::rsub(1.0, t), clamped_log(ad::rsub(1.0, p))));
  return ad::scale(ad::sum(ad::mul(log_likelihood, tape.constant(std::move(coeff)))), -1.0);
}

Var masked_bce_loss(Var au_logits, std::span<const AUVector> truth) {
  Matrix targets(static_cast<Eigen::Index>(truth.size()), kNumAUs);
  Matrix weights(static_cast<Eigen::Index>(truth.size()), kNumAUs);
  for (std::size_t r = 0; r < truth.size(); ++r)
    for (int i = 0; i < kNumAUs; ++i) {
      const auto row = static_cast<Eigen::Index>(r);
      weights(row, i) = truth[r].mask[i] ? 1.0 : 0.0;
      targets(row, i) = truth[r].mask[i] && truth[r].values[i] ? 1.0 : 0.0;
    }
  return masked_bce_loss(au_logits, targets, weights);
}

Var distribution_matching_loss(Var expr_probs, Var au_probs, const RelatednessTable& table, bool reweight) {
  require(expr_probs.cols() == kNumExpressions && au_probs.cols() == kNumAUs && expr_probs.rows() == au_probs.rows() &&
              expr_probs.rows() > 0,
          ErrorCode::ShapeMismatch, "distribution_matching_loss expects N x 7 and N x 17");
  check_distribution_rows(expr_probs.value(), "expression probabilities");
  require((au_probs.value().array() >= 0.0).all() && (au_probs.value().array() <= 1.0).all(), ErrorCode::BadDistribution,
          "AU probabilities must lie in [0,1]");
  ad::Tape& tape = *expr_probs.tape;
  const Var mixture = ad::matmul(expr_probs, tape.constant(table.au_given_emotion(reweight)));
  const Var cross = ad::mul(au_probs, clamped_log(mixture));
  return ad::scale(ad::sum(cross), -1.0 / static_cast<double>(expr_probs.rows()));
}

Var soft_target_cce(Var expr_probs, const Eigen::MatrixXd& soft_labels) {
  require(expr_probs.rows() == soft_labels.rows() && expr_probs.cols() == soft_labels.cols() && soft_labels.rows() > 0,
          ErrorCode::ShapeMismatch, "soft_target_cce shapes");
  check_distribution_rows(expr_probs.value(), "expression probabilities");
  check_distribution_rows(soft_labels, "soft labels");
  const Var cross = ad::mul(expr_probs.tape->constant(soft_labels), clamped_log(expr_probs));
  return ad::scale(ad::sum(cross), -1.0 / static_cast<double>(soft_labels.rows()));
}

Var multitask_sum(ad::Tape& tape, std::optional<Var> emo, std::optional<Var> au, std::optional<Var> va,
                  const LossWeights& weights) {
  require(weights.lambda1 >= 0.0 && weights.lambda2 >= 0.0 && std::isfinite(weights.lambda1) &&
              std::isfinite(weights.lambda2),
          ErrorCode::ValueOutOfRange, "loss weights must be finite and nonnegative");
  Var total = emo ? *emo : tape.scalar(0.0);
  if (au && weights.lambda1 != 0.0) total = ad::add(total, ad::scale(*au, weights.lambda1));
  if (va && weights.lambda2 != 0.0) total = ad::add(total, ad::scale(*va, weights.lambda2));
  return total;
}

Eigen::Index BatchPredictions::rows() const {
  for (const auto* v : {&va, &expr_logits, &au_logits})
    if (*v) return (*v)->rows();
  return 0;
}

void BatchLabels::add_va(Eigen::Index row, const ValenceArousal& va) {
  va_rows.push_back(row);
  va_truth.conservativeResize(static_cast<Eigen::Index>(va_rows.size()), 2);
  va_truth.bottomRows<1>() << va.valence, va.arousal;
}

void BatchLabels::add_expr(Eigen::Index row, Expression e) {
  expr_rows.push_back(row);
  expr_truth.push_back(static_cast<int>(e));
}

void BatchLabels::add_au(Eigen::Index row, const AUVector& au) {
  Eigen::Matrix<double, 1, kNumAUs> t, w;
  for (int i = 0; i < kNumAUs; ++i) {
    w[i] = au.mask[i] ? 1.0 : 0.0;
    t[i] = au.mask[i] && au.values[i] ? 1.0 : 0.0;
  }
  add_au(row, t, w);
}

void BatchLabels::add_au(Eigen::Index row, const Eigen::Matrix<double, 1, kNumAUs>& targets,
                         const Eigen::Matrix<double, 1, kNumAUs>& weights) {
  au_rows.push_back(row);
  const auto n = static_cast<Eigen::Index>(au_rows.size());
  au_targets.conservativeResize(n, kNumAUs);
  au_weights.conservativeResize(n, kNumAUs);
  au_targets.row(n - 1) = targets;
  au_weights.row(n - 1) = weights;
}

MultitaskLoss multitask_loss(const BatchPredictions& batch, const BatchLabels& labels, const LossWeights& weights) {
  std::optional<Var> emo, au, va;
  ad::Tape* tape = nullptr;
  MultitaskLoss out;
  if (!labels.expr_rows.empty()) {
    require(batch.expr_logits.has_value(), ErrorCode::IncompatibleHeads, "EXPR labels without an EXPR head");
    emo = cce_loss(ad::gather_rows(*batch.expr_logits, labels.expr_rows), labels.expr_truth);
    out.emo = emo->scalar();
    tape = emo->tape;
  }
  if (!labels.au_rows.empty()) {
    require(batch.au_logits.has_value(), ErrorCode::IncompatibleHeads, "AU labels without an AU head");
    au = masked_bce_loss(ad::gather_rows(*batch.au_logits, labels.au_rows), labels.au_targets, labels.au_weights);
    out.au = au->scalar();
    tape = au->tape;
  }
  if (!labels.va_rows.empty()) {
    require(batch.va.has_value(), ErrorCode::IncompatibleHeads, "VA labels without a VA head");
    va = ccc_loss(ad::gather_rows(*batch.va, labels.va_rows), labels.va_truth);
    out.va = va->scalar();
    tape = va->tape;
  }
  if (tape == nullptr) {
    for (const auto* v : {&batch.va, &batch.expr_logits, &batch.au_logits})
      if (*v) tape = (*v)->tape;
  }
  require(tape != nullptr, ErrorCode::IncompatibleHeads, "batch has no heads");
  out.total = multitask_sum(*tape, emo, au, va, weights);
  return out;
}

}  // namespace affect
