// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing behind the command line tool: flat key=value configs,
// the synthetic dataset generator with planted emotion/AU structure,
// sampler-driven training with the coupling losses, evaluation reports and
// the finite-difference gradient checker.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affect/losses.hpp"
#include "affect/metrics.hpp"
#include "affect/models.hpp"
#include "affect/types.hpp"

namespace affect {

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment. Throws ConfigError on malformed
/// lines or repeated keys.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);

enum class Coupling { None, CoAnnotation, SoftCoAnnotation, DistrMatching, SoftAndDistr };

std::string coupling_name(Coupling c);
Coupling coupling_from_name(const std::string& name);

struct RunConfig {
  std::uint64_t seed = 0;
  ModelSpec model;
  LossWeights weights;
  Coupling coupling = Coupling::None;
  /// "cognitive", "empirical" or a table file.
  std::string relatedness = "cognitive";
  /// Observational AUs enter coupling with their agreement weight instead of 1.
  bool reweight = false;
  double lr = 1e-4;
  /// Multiplies the learning rate once per epoch after decay_after epochs.
  double lr_decay = 1.0;
  int decay_after = 0;
  /// Total of the three aligned per-task batches.
  std::size_t batch_size = 32;
  /// Frames per training window; 1 trains on independent frames.
  int seq_len = 1;
  int epochs = 1;
  std::string data_dir;
  std::string out_dir;
  std::string init_from;
  bool freeze_encoder = false;

  /// Throws ConfigError on unknown keys or invalid values.
  static RunConfig from_key_values(const KeyValues& kv);
  [[nodiscard]] KeyValues to_key_values() const;
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

struct SyntheticSpec {
  /// Sample (or, with seq_len > 1, sequence) counts per task set: VA, AU, EXPR.
  std::array<std::size_t, 3> train{600, 600, 600};
  std::array<std::size_t, 3> val{100, 100, 100};
  std::array<std::size_t, 3> test{200, 200, 200};
  int feature_dim = 32;
  double noise = 0.2;
  /// Probability that each AU follows the latent emotion's row.
  double consistency = 0.9;
  /// Standard deviation of VA around the emotion's mean point.
  double va_noise = 0.1;
  int seq_len = 1;
  int audio_dim = 0;
  bool landmarks = false;
  std::string relatedness = "cognitive";

  static SyntheticSpec from_key_values(const KeyValues& kv);
  [[nodiscard]] KeyValues to_key_values() const;
  void validate() const;
};

/// Mean VA point of each expression, used by the generator.
ValenceArousal emotion_va_mean(Expression e);

/// Deterministic in (spec, seed). Each sample has a latent emotion drawn
/// uniformly; features are the emotion prototype plus half of each active
/// AU's direction plus Gaussian noise.
std::vector<AnnotatedSample> generate_dataset(const SyntheticSpec& spec, std::uint64_t seed);

std::vector<AnnotatedSample> select_split(const std::vector<AnnotatedSample>& samples, Split split);
ModelDims dataset_dims(const std::vector<AnnotatedSample>& samples);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double emo = 0.0;
  double au = 0.0;
  double va = 0.0;
  double coupling = 0.0;
  /// Validation metrics (empty without validation data).
  std::map<std::string, double> validation;
};

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Trains on the tasks the model has heads for. Throws ConfigError,
/// IncompatibleHeads, or DivergedLoss on a non-finite loss.
TrainResult train_model(const RunConfig& config, const std::vector<AnnotatedSample>& train,
                        const std::vector<AnnotatedSample>& val = {});

/// Reads `<data_dir>`, trains, and writes run.cfg, model.afmt and train_log.csv into out_dir.
TrainResult run_training(const RunConfig& config);

/// Model rebuilt from a run directory written by run_training.
Model load_trained_model(const std::filesystem::path& run_dir, const ModelDims& dims);

/// One record per sample, in sample order. Outputs of missing heads are NaN.
std::vector<PredictionRecord> predict_samples(Model& model, const std::vector<AnnotatedSample>& samples);

/// Metrics for every requested task present in samples. Throws
/// IncompatibleHeads when a requested task has no head.
MetricReport evaluate(Model& model, const std::vector<AnnotatedSample>& samples, const HeadSet& tasks);
MetricReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                  const std::vector<AnnotatedSample>& samples, const HeadSet& tasks);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  int points = 0;
};

/// |a - n| / max(|a|, |n|, 1e-4).
double gradient_rel_error(double analytic, double numeric);

/// Central differences (step 1e-5) at `points` random coordinates for every
/// layer type and loss.
std::vector<GradCheckResult> grad_check_all(std::uint64_t seed, int points = 50);

}  // namespace affect
