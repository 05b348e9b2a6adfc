// SPDX-License-Identifier: Apache-2.0
//
// Declarative model builders. A dense backbone stands in for the convolutional
// trunk; taps expose backbone layers as features, which either feed one
// recurrent stack (concatenated) or one recurrent stack per tap. An optional
// audio stream, landmark concatenation and model-level fusion of several
// member encoders are supported. Heads: VA (linear), EXPR (softmax over 7),
// AU (sigmoid over 17).
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affect/autodiff.hpp"
#include "affect/losses.hpp"

namespace affect {

enum class RecurrentMode { None, Single, PerTap };
enum class FusionTrunk { None, Rnn, Fc };

struct HeadSet {
  bool va = true;
  bool expr = true;
  bool au = true;

  [[nodiscard]] bool any() const { return va || expr || au; }
  [[nodiscard]] Eigen::Index width() const { return (va ? 2 : 0) + (expr ? kNumExpressions : 0) + (au ? kNumAUs : 0); }
  bool operator==(const HeadSet&) const = default;
};

struct ModelSpec {
  std::vector<int> backbone{16};
  std::vector<int> taps{0};
  RecurrentMode recurrent = RecurrentMode::None;
  int hidden = 8;
  int rnn_layers = 1;
  /// 2 adds an audio backbone whose output is fused with the visual features.
  int streams = 1;
  std::vector<int> audio_backbone{8};
  /// Width of the dense layer fusing the two streams.
  int fusion_width = 16;
  HeadSet heads{};
  /// Appends the per-frame landmark vector after the taps.
  bool landmark_concat = false;
  /// Drop probability after each backbone layer (training only).
  double dropout = 0.0;
  /// Drop probability on the input of the first recurrent layer.
  double recurrent_dropout = 0.0;

  /// Model-level fusion: when non-empty the encoders of these members replace
  /// this spec's own backbone and their outputs feed the trunk below.
  std::vector<ModelSpec> members;
  FusionTrunk trunk = FusionTrunk::None;
  int trunk_width = 16;

  bool operator==(const ModelSpec&) const = default;
};

struct ModelDims {
  Eigen::Index visual = 0;
  Eigen::Index audio = 0;
  Eigen::Index landmarks = 0;
};

/// Throws InvalidSpec on the first violated invariant.
void validate(const ModelSpec& spec, const ModelDims& dims);

/// Width of the representation the heads consume.
Eigen::Index encoder_output_width(const ModelSpec& spec, const ModelDims& dims);

/// B sequences x T steps; each entry of visual is B x feature_dim.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> visual;
  std::vector<Eigen::MatrixXd> audio;
  std::vector<Eigen::MatrixXd> landmarks;

  [[nodiscard]] Eigen::Index steps() const { return static_cast<Eigen::Index>(visual.size()); }
  [[nodiscard]] Eigen::Index batch_size() const { return visual.empty() ? 0 : visual.front().rows(); }
};

/// Evaluation-mode outputs for B*T frames, row b*T + t.
struct FramePredictions {
  Eigen::MatrixXd va;    // N x 2 (empty without a VA head)
  Eigen::MatrixXd expr;  // N x 7 probabilities
  Eigen::MatrixXd au;    // N x 17 probabilities
};

class Model {
 public:
  /// Throws InvalidSpec. Parameters are Glorot-initialized from seed.
  static Model build(const ModelSpec& spec, const ModelDims& dims, std::uint64_t seed);

  /// Outputs are ordered b*T + t. Dropout draws from rng only when train is set.
  BatchPredictions forward(ad::Tape& tape, const SequenceBatch& batch, bool train, std::mt19937_64& rng);
  [[nodiscard]] FramePredictions predict(const SequenceBatch& batch);

  [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const ModelDims& dims() const noexcept { return dims_; }
  [[nodiscard]] ad::ParameterSet& params() noexcept { return params_; }
  [[nodiscard]] const ad::ParameterSet& params() const noexcept { return params_; }

  /// Marks every non-head parameter as frozen (or trainable again).
  void freeze_encoder(bool frozen);

 private:
  struct Layer {
    std::size_t w = 0;
    std::size_t b = 0;
  };

  struct Encoder {
    ModelSpec spec;
    std::vector<Layer> backbone;
    std::vector<Layer> audio_backbone;
    std::optional<Layer> stream_fusion;
    std::vector<std::vector<ad::GruCell>> branches;
    std::vector<Encoder> members;
    std::optional<Layer> trunk_fc;
    std::optional<ad::GruCell> trunk_rnn;
    Eigen::Index width = 0;
  };

  static Encoder make_encoder(const ModelSpec& spec, const ModelDims& dims, ad::ParameterSet& params,
                              const std::string& prefix);
  std::vector<ad::Var> encode(const Encoder& enc, ad::Tape& tape, const SequenceBatch& batch, bool train,
                              std::mt19937_64& rng);
  ad::Var layer(ad::Tape& tape, const Layer& l, ad::Var x);

  ModelSpec spec_;
  ModelDims dims_;
  ad::ParameterSet params_;
  Encoder encoder_;
  std::optional<Layer> head_va_, head_expr_, head_au_;
};

struct SequencePrediction {
  FramePredictions frames;
  double median_valence = 0.0;
  double median_arousal = 0.0;
};

/// Runs one sequence (B = 1) and reduces VA to per-dimension medians.
/// Throws EmptySequence for an empty frame list.
SequencePrediction predict_sequence(Model& model, const std::vector<Eigen::VectorXd>& frames,
                                    const std::vector<Eigen::VectorXd>& audio = {},
                                    const std::vector<Eigen::VectorXd>& landmarks = {});

}  // namespace affect
