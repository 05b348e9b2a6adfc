// SPDX-License-Identifier: Apache-2.0
#include "affect/models.hpp"

#include <algorithm>
#include <set>

#include "affect/error.hpp"
#include "affect/metrics.hpp"

namespace affect {

using ad::Var;

namespace {

Eigen::Index tap_width(const ModelSpec& spec) {
  Eigen::Index w = 0;
  for (int t : spec.taps) w += spec.backbone[static_cast<std::size_t>(t)];
  return w;
}

/// Input widths of the recurrent branches (or of the output when there is no recurrence).
std::vector<Eigen::Index> branch_widths(const ModelSpec& spec, const ModelDims& dims) {
  const Eigen::Index lm = spec.landmark_concat ? dims.landmarks : 0;
  const Eigen::Index audio = spec.streams == 2 ? spec.audio_backbone.back() : 0;
  if (spec.recurrent == RecurrentMode::PerTap) {
    std::vector<Eigen::Index> widths;
    for (int t : spec.taps) widths.push_back(spec.backbone[static_cast<std::size_t>(t)] + lm);
    if (spec.streams == 2) widths.push_back(audio);
    return widths;
  }
  if (spec.streams == 2) return {spec.fusion_width};
  return {tap_width(spec) + lm};
}

}  // namespace

void validate(const ModelSpec& spec, const ModelDims& dims) {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidSpec, what); };
  if (!spec.members.empty()) {
    if (spec.trunk == FusionTrunk::None) bad("model-level fusion needs an rnn or fc trunk");
    if (spec.trunk_width < 1) bad("trunk width must be positive");
    for (const auto& m : spec.members) {
      validate(m, dims);
      if (m.streams != spec.members.front().streams || m.landmark_concat != spec.members.front().landmark_concat)
        bad("fused members must consume the same inputs");
    }
  } else {
    if (spec.backbone.empty()) bad("backbone needs at least one layer");
    if (std::any_of(spec.backbone.begin(), spec.backbone.end(), [](int w) { return w < 1; })) bad("layer width < 1");
    if (spec.taps.empty()) bad("at least one tap is required");
    std::set<int> seen;
    for (int t : spec.taps) {
      if (t < 0 || t >= static_cast<int>(spec.backbone.size())) bad("tap index " + std::to_string(t) + " out of range");
      if (!seen.insert(t).second) bad("duplicate tap");
    }
    if (spec.recurrent == RecurrentMode::PerTap && spec.taps.size() < 2) bad("per_tap recurrence needs at least two taps");
    if (spec.recurrent != RecurrentMode::None && (spec.hidden < 1 || spec.rnn_layers < 1)) bad("recurrent sizes < 1");
    if (spec.streams != 1 && spec.streams != 2) bad("streams must be 1 or 2");
    if (spec.streams == 2) {
      if (dims.audio < 1) bad("dual-stream model without audio features");
      if (spec.audio_backbone.empty() || spec.fusion_width < 1) bad("audio backbone/fusion width");
    }
    if (spec.landmark_concat && dims.landmarks < 1) bad("landmark concatenation without landmark features");
    if (spec.dropout < 0.0 || spec.dropout >= 1.0 || spec.recurrent_dropout < 0.0 || spec.recurrent_dropout >= 1.0)
      bad("dropout probabilities must lie in [0,1)");
  }
  if (!spec.heads.any()) bad("at least one head is required");
  if (dims.visual < 1) bad("visual feature dimension must be positive");
}

Eigen::Index encoder_output_width(const ModelSpec& spec, const ModelDims& dims) {
  if (!spec.members.empty()) return spec.trunk_width;
  const auto widths = branch_widths(spec, dims);
  if (spec.recurrent == RecurrentMode::None) return widths.front();
  return spec.hidden * static_cast<Eigen::Index>(widths.size());
}

Var Model::layer(ad::Tape& tape, const Layer& l, Var x) {
  return ad::dense(x, tape.parameter(params_[l.w]), tape.parameter(params_[l.b]));
}

Model::Encoder Model::make_encoder(const ModelSpec& spec, const ModelDims& dims, ad::ParameterSet& params,
                                   const std::string& prefix) {
  Encoder enc;
  enc.spec = spec;
  if (!spec.members.empty()) {
    Eigen::Index in = 0;
    for (std::size_t i = 0; i < spec.members.size(); ++i) {
      enc.members.push_back(make_encoder(spec.members[i], dims, params, prefix + "member" + std::to_string(i) + "."));
      in += enc.members.back().width;
    }
    if (spec.trunk == FusionTrunk::Fc) {
      enc.trunk_fc = Layer{params.add_weight(prefix + "trunk.W", in, spec.trunk_width),
                           params.add_bias(prefix + "trunk.b", spec.trunk_width)};
    } else {
      enc.trunk_rnn = ad::GruCell::create(params, prefix + "trunk.gru", in, spec.trunk_width);
    }
    enc.width = spec.trunk_width;
    return enc;
  }

  Eigen::Index in = dims.visual;
  for (std::size_t i = 0; i < spec.backbone.size(); ++i) {
    const std::string name = prefix + "backbone." + std::to_string(i);
    enc.backbone.push_back({params.add_weight(name + ".W", in, spec.backbone[i]), params.add_bias(name + ".b", spec.backbone[i])});
    in = spec.backbone[i];
  }
  if (spec.streams == 2) {
    in = dims.audio;
    for (std::size_t i = 0; i < spec.audio_backbone.size(); ++i) {
      const std::string name = prefix + "audio." + std::to_string(i);
      enc.audio_backbone.push_back(
          {params.add_weight(name + ".W", in, spec.audio_backbone[i]), params.add_bias(name + ".b", spec.audio_backbone[i])});
      in = spec.audio_backbone[i];
    }
    if (spec.recurrent != RecurrentMode::PerTap) {
      const Eigen::Index lm = spec.landmark_concat ? dims.landmarks : 0;
      const Eigen::Index fused_in = tap_width(spec) + lm + spec.audio_backbone.back();
      enc.stream_fusion = Layer{params.add_weight(prefix + "fusion.W", fused_in, spec.fusion_width),
                                params.add_bias(prefix + "fusion.b", spec.fusion_width)};
    }
  }
  if (spec.recurrent != RecurrentMode::None) {
    const auto widths = branch_widths(spec, dims);
    for (std::size_t b = 0; b < widths.size(); ++b) {
      std::vector<ad::GruCell> stack;
      Eigen::Index layer_in = widths[b];
      for (int l = 0; l < spec.rnn_layers; ++l) {
        stack.push_back(ad::GruCell::create(params, prefix + "rnn" + std::to_string(b) + "." + std::to_string(l), layer_in,
                                            spec.hidden));
        layer_in = spec.hidden;
      }
      enc.branches.push_back(std::move(stack));
    }
  }
  enc.width = encoder_output_width(spec, dims);
  return enc;
}

Model Model::build(const ModelSpec& spec, const ModelDims& dims, std::uint64_t seed) {
  validate(spec, dims);
  Model m;
  m.spec_ = spec;
  m.dims_ = dims;
  m.encoder_ = make_encoder(spec, dims, m.params_, "");
  const Eigen::Index w = m.encoder_.width;
  if (spec.heads.va) m.head_va_ = Layer{m.params_.add_weight("head.va.W", w, 2), m.params_.add_bias("head.va.b", 2)};
  if (spec.heads.expr)
    m.head_expr_ = Layer{m.params_.add_weight("head.expr.W", w, kNumExpressions), m.params_.add_bias("head.expr.b", kNumExpressions)};
  if (spec.heads.au)
    m.head_au_ = Layer{m.params_.add_weight("head.au.W", w, kNumAUs), m.params_.add_bias("head.au.b", kNumAUs)};
  ad::init_params(m.params_, seed);
  return m;
}

void Model::freeze_encoder(bool frozen) {
  for (auto& p : params_)
    if (p.name.rfind("head.", 0) != 0) p.trainable = !frozen;
}

std::vector<Var> Model::encode(const Encoder& enc, ad::Tape& tape, const SequenceBatch& batch, bool train,
                               std::mt19937_64& rng) {
  const ModelSpec& spec = enc.spec;
  const Eigen::Index steps = batch.steps();
  const Eigen::Index rows = batch.batch_size();

  if (!enc.members.empty()) {
    std::vector<std::vector<Var>> outs;
    for (const auto& m : enc.members) outs.push_back(encode(m, tape, batch, train, rng));
    std::vector<Var> result;
    std::optional<Var> h;
    for (Eigen::Index t = 0; t < steps; ++t) {
      std::vector<Var> parts;
      for (const auto& o : outs) parts.push_back(o[static_cast<std::size_t>(t)]);
      const Var joint = ad::concat_cols(parts);
      if (enc.trunk_fc) {
        result.push_back(ad::relu(layer(tape, *enc.trunk_fc, joint)));
      } else {
        if (!h) h = tape.constant(Eigen::MatrixXd::Zero(rows, enc.trunk_rnn->hidden_dim));
        h = ad::gru_step(tape, params_, *enc.trunk_rnn, joint, *h);
        result.push_back(*h);
      }
    }
    return result;
  }

  // Per-step branch inputs.
  std::vector<std::vector<Var>> branch_in(steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    Var x = tape.constant(batch.visual[ts]);
    std::vector<Var> taps;
    for (std::size_t i = 0; i < enc.backbone.size(); ++i) {
      x = ad::dropout(ad::relu(layer(tape, enc.backbone[i], x)), spec.dropout, train, rng);
      if (std::find(spec.taps.begin(), spec.taps.end(), static_cast<int>(i)) != spec.taps.end()) taps.push_back(x);
    }
    std::optional<Var> lm;
    if (spec.landmark_concat) lm = tape.constant(batch.landmarks[ts]);
    std::optional<Var> audio;
    if (spec.streams == 2) {
      Var a = tape.constant(batch.audio[ts]);
      for (const auto& l : enc.audio_backbone) a = ad::dropout(ad::relu(layer(tape, l, a)), spec.dropout, train, rng);
      audio = a;
    }

    if (spec.recurrent == RecurrentMode::PerTap) {
      for (const Var& tap : taps) {
        if (lm) {
          const Var parts[] = {tap, *lm};
          branch_in[ts].push_back(ad::concat_cols(parts));
        } else {
          branch_in[ts].push_back(tap);
        }
      }
      if (audio) branch_in[ts].push_back(*audio);
    } else {
      std::vector<Var> parts = taps;
      if (lm) parts.push_back(*lm);
      if (audio) parts.push_back(*audio);
      Var joint = ad::concat_cols(parts);
      if (enc.stream_fusion) joint = ad::relu(layer(tape, *enc.stream_fusion, joint));
      branch_in[ts].push_back(joint);
    }
  }

  std::vector<Var> result;
  if (spec.recurrent == RecurrentMode::None) {
    for (auto& in : branch_in) result.push_back(in.front());
    return result;
  }

  // Run each branch's recurrent stack over time, layer by layer.
  std::vector<std::vector<Var>> branch_out;
  for (std::size_t b = 0; b < enc.branches.size(); ++b) {
    std::vector<Var> seq;
    for (Eigen::Index t = 0; t < steps; ++t)
      seq.push_back(ad::dropout(branch_in[static_cast<std::size_t>(t)][b], spec.recurrent_dropout, train, rng));
    for (const auto& cell : enc.branches[b]) {
      Var h = tape.constant(Eigen::MatrixXd::Zero(rows, cell.hidden_dim));
      for (auto& x : seq) {
        h = ad::gru_step(tape, params_, cell, x, h);
        x = h;
      }
    }
    branch_out.push_back(std::move(seq));
  }
  for (Eigen::Index t = 0; t < steps; ++t) {
    std::vector<Var> parts;
    for (const auto& o : branch_out) parts.push_back(o[static_cast<std::size_t>(t)]);
    result.push_back(parts.size() == 1 ? parts.front() : ad::concat_cols(parts));
  }
  return result;
}

BatchPredictions Model::forward(ad::Tape& tape, const SequenceBatch& batch, bool train, std::mt19937_64& rng) {
  const Eigen::Index steps = batch.steps();
  const Eigen::Index rows = batch.batch_size();
  require(steps >= 1 && rows >= 1, ErrorCode::ShapeMismatch, "empty batch");
  const bool uses_audio = spec_.members.empty() ? spec_.streams == 2 : spec_.members.front().streams == 2;
  const bool uses_lm = spec_.members.empty() ? spec_.landmark_concat : spec_.members.front().landmark_concat;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    require(batch.visual[ts].rows() == rows && batch.visual[ts].cols() == dims_.visual, ErrorCode::ShapeMismatch,
            "visual features must be B x " + std::to_string(dims_.visual));
    if (uses_audio)
      require(batch.audio.size() == batch.visual.size() && batch.audio[ts].rows() == rows && batch.audio[ts].cols() == dims_.audio,
              ErrorCode::ShapeMismatch, "audio features must be B x " + std::to_string(dims_.audio));
    if (uses_lm)
      require(batch.landmarks.size() == batch.visual.size() && batch.landmarks[ts].rows() == rows &&
                  batch.landmarks[ts].cols() == dims_.landmarks,
              ErrorCode::ShapeMismatch, "landmarks must be B x " + std::to_string(dims_.landmarks));
  }

  const std::vector<Var> per_step = encode(encoder_, tape, batch, train, rng);
  // Rows come out time-major; reorder to sequence-major (b*T + t).
  const Var stacked = per_step.size() == 1 ? per_step.front() : ad::concat_rows(per_step);
  Var features = stacked;
  if (steps > 1) {
    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(rows * steps));
    for (Eigen::Index b = 0; b < rows; ++b)
      for (Eigen::Index t = 0; t < steps; ++t) order.push_back(t * rows + b);
    features = ad::gather_rows(stacked, order);
  }

  BatchPredictions out;
  if (head_va_) out.va = layer(tape, *head_va_, features);
  if (head_expr_) {
    out.expr_logits = layer(tape, *head_expr_, features);
    out.expr_probs = ad::softmax_rows(*out.expr_logits);
  }
  if (head_au_) {
    out.au_logits = layer(tape, *head_au_, features);
    out.au_probs = ad::sigmoid(*out.au_logits);
  }
  return out;
}

FramePredictions Model::predict(const SequenceBatch& batch) {
  ad::Tape tape;
  std::mt19937_64 unused(0);
  const BatchPredictions p = forward(tape, batch, false, unused);
  FramePredictions out;
  if (p.va) out.va = p.va->value();
  if (p.expr_probs) out.expr = p.expr_probs->value();
  if (p.au_probs) out.au = p.au_probs->value();
  return out;
}

SequencePrediction predict_sequence(Model& model, const std::vector<Eigen::VectorXd>& frames,
                                    const std::vector<Eigen::VectorXd>& audio,
                                    const std::vector<Eigen::VectorXd>& landmarks) {
  require(!frames.empty(), ErrorCode::EmptySequence, "no frames");
  SequenceBatch batch;
  for (const auto& f : frames) batch.visual.push_back(f.transpose());
  for (const auto& a : audio) batch.audio.push_back(a.transpose());
  for (const auto& l : landmarks) batch.landmarks.push_back(l.transpose());
  SequencePrediction out;
  out.frames = model.predict(batch);
  if (out.frames.va.size() > 0) {
    const Eigen::VectorXd v = out.frames.va.col(0);
    const Eigen::VectorXd a = out.frames.va.col(1);
    out.median_valence = median(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    out.median_arousal = median(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
  }
  return out;
}

}  // namespace affect
