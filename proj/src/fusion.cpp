// SPDX-License-Identifier: Apache-2.0
#include "affect/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "affect/error.hpp"
#include "affect/io.hpp"
#include "affect/metrics.hpp"

namespace affect {

std::vector<FrameVA> decision_level_fuse(std::span<const EnsembleMember> members) {
  require(!members.empty(), ErrorCode::ZeroWeightSum, "no ensemble members");
  double sum_v = 0.0, sum_a = 0.0;
  for (const auto& m : members) {
    require(m.val_ccc_v >= 0.0 && m.val_ccc_a >= 0.0, ErrorCode::NegativeWeight,
            "member '" + m.member_id + "' has a negative validation CCC");
    require(m.predictions.size() == members.front().predictions.size(), ErrorCode::KeyMisalignment,
            "member '" + m.member_id + "' has a different frame count");
    sum_v += m.val_ccc_v;
    sum_a += m.val_ccc_a;
  }
  require(sum_v > 0.0 && sum_a > 0.0, ErrorCode::ZeroWeightSum, "fusion weights sum to zero");

  std::vector<FrameVA> fused = members.front().predictions;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    double v = 0.0, a = 0.0;
    for (const auto& m : members) {
      const FrameVA& f = m.predictions[i];
      require(f.id == fused[i].id && f.frame_index == fused[i].frame_index, ErrorCode::KeyMisalignment,
              "frame " + std::to_string(i) + " of '" + m.member_id + "' is keyed differently");
      v += m.val_ccc_v * f.valence;
      a += m.val_ccc_a * f.arousal;
    }
    fused[i].valence = v / sum_v;
    fused[i].arousal = a / sum_a;
  }
  return fused;
}

ModelSpec model_level_fuse_spec(std::span<const ModelSpec> member_specs, FusionTrunk mode, int width) {
  require(!member_specs.empty(), ErrorCode::InvalidSpec, "model-level fusion needs at least one member");
  require(mode != FusionTrunk::None, ErrorCode::InvalidSpec, "fusion mode must be rnn or fc");
  require(width >= 1, ErrorCode::InvalidSpec, "fusion width must be positive");
  ModelSpec composite;
  composite.members.assign(member_specs.begin(), member_specs.end());
  composite.trunk = mode;
  composite.trunk_width = width;
  composite.heads = HeadSet{false, false, false};
  for (const auto& m : member_specs) {
    require(m.members.empty(), ErrorCode::InvalidSpec, "nested model-level fusion is not supported");
    require(m.streams == member_specs.front().streams && m.landmark_concat == member_specs.front().landmark_concat,
            ErrorCode::InvalidSpec, "fused members must consume the same inputs");
    composite.heads.va |= m.heads.va;
    composite.heads.expr |= m.heads.expr;
    composite.heads.au |= m.heads.au;
  }
  return composite;
}

Eigen::VectorXd median_filter(const Eigen::VectorXd& series, int window) {
  require(window >= 1, ErrorCode::EvenWindow, "window must be positive");
  require(window % 2 == 1, ErrorCode::EvenWindow, "median window must be odd, got " + std::to_string(window));
  const Eigen::Index n = series.size();
  const Eigen::Index half = window / 2;
  Eigen::VectorXd out(n);
  std::vector<double> buf(static_cast<std::size_t>(window));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = -half; k <= half; ++k)
      buf[static_cast<std::size_t>(k + half)] = series[std::clamp<Eigen::Index>(i + k, 0, n - 1)];
    out[i] = median(buf);
  }
  return out;
}

Eigen::VectorXd smooth(const Eigen::VectorXd& series, double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::BadAlpha, "alpha must lie in (0,1]");
  Eigen::VectorXd out(series.size());
  for (Eigen::Index i = 0; i < series.size(); ++i)
    out[i] = i == 0 ? series[0] : alpha * series[i] + (1.0 - alpha) * out[i - 1];
  return out;
}

std::map<std::string, ValenceArousal> utterance_aggregate(
    const std::map<std::string, std::vector<ValenceArousal>>& sequence_medians) {
  std::map<std::string, ValenceArousal> out;
  for (const auto& [utterance, medians] : sequence_medians) {
    require(!medians.empty(), ErrorCode::EmptyUtterance, "utterance '" + utterance + "' has no sequences");
    ValenceArousal mean;
    for (const auto& m : medians) {
      mean.valence += m.valence;
      mean.arousal += m.arousal;
    }
    mean.valence /= static_cast<double>(medians.size());
    mean.arousal /= static_cast<double>(medians.size());
    out[utterance] = mean;
  }
  return out;
}

Eigen::VectorXd postprocess(const Eigen::VectorXd& series, const PostprocessConfig& config) {
  Eigen::VectorXd out = config.median_window > 1 ? median_filter(series, config.median_window) : series;
  return config.smooth_alpha < 1.0 ? smooth(out, config.smooth_alpha) : out;
}

std::vector<PostprocessConfig> default_postprocess_grid() {
  std::vector<PostprocessConfig> grid;
  for (int w : {1, 3, 5, 7, 9})
    for (double a : {1.0, 0.7, 0.5, 0.3}) grid.push_back({w, a});
  return grid;
}

PostprocessConfig choose_postprocessing(const Eigen::VectorXd& predictions, const Eigen::VectorXd& annotations,
                                        std::span<const PostprocessConfig> grid) {
  PostprocessConfig best{};
  double best_ccc = ccc(annotations, predictions).value;
  for (const auto& config : grid) {
    const double score = ccc(annotations, postprocess(predictions, config)).value;
    if (score > best_ccc) {
      best_ccc = score;
      best = config;
    }
  }
  return best;
}

std::vector<EnsembleMember> load_member_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  require(in.good(), ErrorCode::IOError, "cannot open " + manifest.string());
  std::vector<EnsembleMember> members;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      fields.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    if (fields[0] == "member_id") continue;
    require(fields.size() == 4, ErrorCode::ParseError, "manifest line needs member_id, ccc_v, ccc_a, path");
    EnsembleMember m;
    m.member_id = fields[0];
    try {
      m.val_ccc_v = std::stod(fields[1]);
      m.val_ccc_a = std::stod(fields[2]);
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "bad CCC weight in manifest line for '" + fields[0] + "'");
    }
    std::filesystem::path path = fields[3];
    if (path.is_relative()) path = manifest.parent_path() / path;
    for (const auto& r : read_predictions(path)) m.predictions.push_back({r.id, r.frame_index, r.valence, r.arousal});
    members.push_back(std::move(m));
  }
  return members;
}

}  // namespace affect
