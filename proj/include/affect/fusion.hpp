// SPDX-License-Identifier: Apache-2.0
//
// Ensemble combination and temporal post-processing of valence/arousal
// predictions.
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affect/models.hpp"

namespace affect {

struct FrameVA {
  std::string id;
  int frame_index = 0;
  double valence = 0.0;
  double arousal = 0.0;
};

struct EnsembleMember {
  std::string member_id;
  /// Validation CCCs, used as fusion weights.
  double val_ccc_v = 0.0;
  double val_ccc_a = 0.0;
  std::vector<FrameVA> predictions;
};

/// Per frame and dimension: sum_n t_n o_n / sum_n t_n. Members must list the
/// same (id, frame_index) keys in the same order. Throws NegativeWeight,
/// ZeroWeightSum or KeyMisalignment.
std::vector<FrameVA> decision_level_fuse(std::span<const EnsembleMember> members);

/// Composite spec whose member encoders are concatenated per frame and fed to
/// a recurrent (rnn) or dense (fc) trunk of the given width. Heads are the
/// union of the members' heads.
ModelSpec model_level_fuse_spec(std::span<const ModelSpec> member_specs, FusionTrunk mode, int width);

/// Sliding median with replicated edges; window must be odd.
Eigen::VectorXd median_filter(const Eigen::VectorXd& series, int window);

/// Causal exponential smoothing y_t = alpha x_t + (1 - alpha) y_{t-1}, y_0 = x_0.
Eigen::VectorXd smooth(const Eigen::VectorXd& series, double alpha);

/// Mean of the sequence medians of each utterance, per dimension.
std::map<std::string, ValenceArousal> utterance_aggregate(
    const std::map<std::string, std::vector<ValenceArousal>>& sequence_medians);

struct PostprocessConfig {
  int median_window = 1;
  double smooth_alpha = 1.0;

  bool operator==(const PostprocessConfig&) const = default;
};

Eigen::VectorXd postprocess(const Eigen::VectorXd& series, const PostprocessConfig& config);

/// Grid searched by choose_postprocessing: windows {1,3,5,7,9} x alphas {1, 0.7, 0.5, 0.3}.
std::vector<PostprocessConfig> default_postprocess_grid();

/// The grid entry with the best CCC on validation data; the identity config
/// wins unless another entry strictly improves on it.
PostprocessConfig choose_postprocessing(const Eigen::VectorXd& predictions, const Eigen::VectorXd& annotations,
                                        std::span<const PostprocessConfig> grid);

/// Reads `member_id, ccc_v, ccc_a, path` lines; relative paths resolve
/// against the manifest's directory. Prediction files use the harness CSV.
std::vector<EnsembleMember> load_member_manifest(const std::filesystem::path& manifest);

}  // namespace affect
