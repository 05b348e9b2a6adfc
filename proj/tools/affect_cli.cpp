// SPDX-License-Identifier: Apache-2.0
//
// affect: command line front end.
//
//   affect gen-data --spec s.cfg --seed 7 --out data/
//   affect train --config run.cfg
//   affect eval --run runs/a --data data/ --split test
//   affect fuse --manifest members.csv --out fused.csv
//   affect zero-shot --predictions preds.csv --out compound.csv
//   affect align --landmarks lm.csv --out affines.csv
//   affect spectrogram --audio clip.raw --out spec.csv
//   affect grad-check --all
//
// Exit status: 0 success, 1 usage error, 2 runtime error.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "affect/error.hpp"
#include "affect/fusion.hpp"
#include "affect/harness.hpp"
#include "affect/io.hpp"
#include "affect/preprocess.hpp"
#include "affect/zeroshot.hpp"

namespace {

using namespace affect;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IOError, "cannot write " + path);
  return out;
}

HeadSet parse_tasks(const std::string& s) {
  HeadSet h{false, false, false};
  for (const auto& part : split(s, ',')) {
    if (part == "va") {
      h.va = true;
    } else if (part == "expr") {
      h.expr = true;
    } else if (part == "au") {
      h.au = true;
    } else {
      throw CLI::ValidationError("--tasks", "tasks are va, expr and au");
    }
  }
  return h;
}

int run_gen_data(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
  SyntheticSpec spec;
  if (!spec_path.empty()) spec = SyntheticSpec::from_key_values(load_key_values(spec_path));
  save_dataset(out_dir, generate_dataset(spec, seed));
  std::printf("wrote %s\n", out_dir.c_str());
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string init_from;
  bool freeze = false;
};

int run_train(const TrainArgs& a) {
  RunConfig config = load_run_config(a.config);
  if (!a.data.empty()) config.data_dir = a.data;
  if (!a.out.empty()) config.out_dir = a.out;
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  if (!a.init_from.empty()) config.init_from = a.init_from;
  if (a.freeze) config.freeze_encoder = true;
  config.validate();
  const TrainResult r = run_training(config);
  for (const auto& e : r.log) std::printf("epoch %d  loss %.6f\n", e.epoch, e.total);
  std::printf("wrote %s\n", config.out_dir.c_str());
  return 0;
}

struct EvalArgs {
  std::string run;
  std::string data;
  std::string split = "test";
  std::string tasks;
  std::string report;
  std::string predictions;
};

int run_eval(const EvalArgs& a) {
  const auto samples = select_split(load_dataset(a.data), split_from_name(a.split));
  Model model = load_trained_model(a.run, dataset_dims(samples));
  const HeadSet tasks = a.tasks.empty() ? model.spec().heads : parse_tasks(a.tasks);
  const MetricReport report = evaluate(model, samples, tasks);
  report.write(std::cout);
  if (!a.report.empty()) report.save(a.report);
  if (!a.predictions.empty()) write_predictions(a.predictions, predict_samples(model, samples));
  return 0;
}

int run_fuse(const std::string& manifest, const std::string& out_path, int window, double alpha) {
  const auto members = load_member_manifest(manifest);
  std::vector<FrameVA> fused = decision_level_fuse(members);
  if (window > 1 || alpha < 1.0) {
    // Post-processing runs per sequence id over frame order as listed.
    std::map<std::string, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < fused.size(); ++i) by_id[fused[i].id].push_back(i);
    for (const auto& [id, rows] : by_id) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size())), ar(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) {
        v[static_cast<Eigen::Index>(k)] = fused[rows[k]].valence;
        ar[static_cast<Eigen::Index>(k)] = fused[rows[k]].arousal;
      }
      const PostprocessConfig pp{window, alpha};
      v = postprocess(v, pp);
      ar = postprocess(ar, pp);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        fused[rows[k]].valence = v[static_cast<Eigen::Index>(k)];
        fused[rows[k]].arousal = ar[static_cast<Eigen::Index>(k)];
      }
    }
  }
  std::ofstream out = open_output(out_path);
  out << "id,frame_index,valence,arousal\n";
  for (const auto& f : fused)
    out << f.id << ',' << f.frame_index << ',' << format_double(f.valence) << ',' << format_double(f.arousal) << '\n';
  std::printf("fused %zu members over %zu frames into %s\n", members.size(), fused.size(), out_path.c_str());
  return 0;
}

int run_zero_shot(const std::string& preds_path, const std::string& defs_path, const std::string& relatedness,
                  const std::string& out_path) {
  const RelatednessTable table = relatedness_by_name(relatedness);
  const auto defs = defs_path.empty() ? default_compound_defs(table) : load_compound_defs(defs_path, table);
  std::ofstream out = open_output(out_path);
  out << "id,frame_index,compound,score\n";
  for (const auto& p : read_predictions(std::filesystem::path(preds_path))) {
    const CompoundClassDef& best = classify_compound(defs, p);
    out << p.id << ',' << p.frame_index << ',' << best.name << ',' << format_double(candidate_score(best, p)) << '\n';
  }
  return 0;
}

int run_align(const std::string& landmarks_path, const std::string& out_path) {
  const LandmarkSet<double> canonical = canonical_template();
  std::ofstream out = open_output(out_path);
  out << "frame,a11,a12,a13,a21,a22,a23,residual\n";
  for (const auto& [frame, lm] : read_landmarks(landmarks_path)) {
    const auto fit = fit_alignment(lm, canonical);
    out << frame;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) out << ',' << format_double(fit.affine(r, c));
    out << ',' << format_double(fit.residual) << '\n';
  }
  return 0;
}

int run_spectrogram(const std::string& audio_path, const std::string& out_path, std::optional<std::size_t> hop) {
  const AudioClip clip = read_audio(audio_path);
  SpectrogramConfig config;
  config.sample_rate_hz = clip.sample_rate_hz;
  config.hop_override = hop;
  const Eigen::MatrixXd s = spectrogram(clip.samples, config);
  std::ofstream out = open_output(out_path);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) out << (c ? "," : "") << format_double(s(r, c));
    out << '\n';
  }
  std::printf("%lld frames x %lld bins (window %zu, hop %zu)\n", static_cast<long long>(s.rows()),
              static_cast<long long>(s.cols()), config.window_samples(), config.hop_samples());
  return 0;
}

int run_grad_check(std::uint64_t seed, int points) {
  constexpr double kTolerance = 1e-4;
  bool ok = true;
  for (const auto& r : grad_check_all(seed, points)) {
    const bool pass = r.max_rel_error < kTolerance;
    ok = ok && pass;
    std::printf("%-42s points %3d  max rel err %.3e  %s\n", r.name.c_str(), r.points, r.max_rel_error,
                pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task facial affect toolkit"};
  app.require_subcommand(1);
  int status = 0;

  std::string spec_path, out_dir;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset with planted emotion/AU structure");
  gen->add_option("--spec", spec_path, "Synthetic spec (key = value)")->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->callback([&] { status = run_gen_data(spec_path, seed, out_dir); });

  TrainArgs train_args;
  std::uint64_t train_seed = 0;
  int train_epochs = 0;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", train_args.config, "Run config (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", train_args.data, "Dataset directory (overrides data_dir)");
  train->add_option("--out", train_args.out, "Run directory (overrides out_dir)");
  auto* seed_opt = train->add_option("--seed", train_seed, "Seed (overrides seed)");
  auto* epochs_opt = train->add_option("--epochs", train_epochs, "Epochs (overrides epochs)");
  train->add_option("--init-from", train_args.init_from, "Checkpoint to initialize matching parameters from")
      ->check(CLI::ExistingFile);
  train->add_flag("--freeze-encoder", train_args.freeze, "Train only the heads");
  train->callback([&] {
    if (*seed_opt) train_args.seed = train_seed;
    if (*epochs_opt) train_args.epochs = train_epochs;
    status = run_train(train_args);
  });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on a dataset split");
  eval->add_option("--run", eval_args.run, "Run directory written by train")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", eval_args.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", eval_args.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--tasks", eval_args.tasks, "Comma list of va, expr, au (default: the model's heads)");
  eval->add_option("--report", eval_args.report, "Write the metric report here");
  eval->add_option("--predictions", eval_args.predictions, "Write per-sample predictions here");
  eval->callback([&] { status = run_eval(eval_args); });

  std::string manifest, fuse_out;
  int window = 1;
  double alpha = 1.0;
  auto* fuse = app.add_subcommand("fuse", "Validation-CCC weighted fusion of member predictions");
  fuse->add_option("--manifest", manifest, "Lines: member_id, ccc_v, ccc_a, path")->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", fuse_out, "Fused VA CSV")->required();
  fuse->add_option("--median-window", window, "Odd median filter window (1 = off)");
  fuse->add_option("--smooth-alpha", alpha, "Exponential smoothing factor in (0,1] (1 = off)");
  fuse->callback([&] { status = run_fuse(manifest, fuse_out, window, alpha); });

  std::string preds, defs, relatedness = "cognitive", zs_out;
  auto* zs = app.add_subcommand("zero-shot", "Score compound expressions from multi-task predictions");
  zs->add_option("--predictions", preds, "Prediction CSV")->required()->check(CLI::ExistingFile);
  zs->add_option("--defs", defs, "Compound definitions (default: the eleven two-emotion classes)")->check(CLI::ExistingFile);
  zs->add_option("--relatedness", relatedness, "cognitive, empirical or a table file");
  zs->add_option("--out", zs_out, "Output CSV")->required();
  zs->callback([&] { status = run_zero_shot(preds, defs, relatedness, zs_out); });

  std::string lm_path, align_out;
  auto* align = app.add_subcommand("align", "Fit five-landmark affine alignments per frame");
  align->add_option("--landmarks", lm_path, "CSV frame,x1,y1,...,x5,y5")->required()->check(CLI::ExistingFile);
  align->add_option("--out", align_out, "Output CSV of affines and residuals")->required();
  align->callback([&] { status = run_align(lm_path, align_out); });

  std::string audio_path, spec_out;
  std::size_t hop = 0;
  auto* spec = app.add_subcommand("spectrogram", "Magnitude spectrogram normalized to [-1,1]");
  spec->add_option("--audio", audio_path, "Raw audio file (header 'rate R length N', then f64 samples)")
      ->required()
      ->check(CLI::ExistingFile);
  spec->add_option("--out", spec_out, "Output CSV, one frame per row")->required();
  auto* hop_opt = spec->add_option("--hop", hop, "Frame step in samples (default: window - overlap)")
                      ->check(CLI::PositiveNumber);
  spec->callback([&] {
    status = run_spectrogram(audio_path, spec_out, *hop_opt ? std::optional<std::size_t>(hop) : std::nullopt);
  });

  bool all = false;
  std::uint64_t gc_seed = 0;
  int points = 50;
  auto* gc = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  gc->add_flag("--all", all, "Check every layer type and loss")->required();
  gc->add_option("--seed", gc_seed, "Random seed");
  gc->add_option("--points", points, "Coordinates per check")->check(CLI::PositiveNumber);
  gc->callback([&] { status = run_grad_check(gc_seed, points); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const affect::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return status;
}
