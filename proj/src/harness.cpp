// SPDX-License-Identifier: Apache-2.0
#include "affect/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "affect/error.hpp"
#include "affect/fusion.hpp"
#include "affect/io.hpp"
#include "affect/preprocess.hpp"
#include "affect/relatedness.hpp"
#include "affect/sampler.hpp"

namespace affect {

using ad::Var;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// ---------------------------------------------------------------------------
// Typed access to a key/value map that remembers which keys were consumed.

class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  const std::string* raw(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const std::string* v = raw(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        out = *v;
      } else if constexpr (std::is_same_v<T, bool>) {
        require(*v == "0" || *v == "1" || *v == "true" || *v == "false", ErrorCode::ConfigError, "");
        out = *v == "1" || *v == "true";
      } else if constexpr (std::is_floating_point_v<T>) {
        out = parse_double(*v);
      } else if constexpr (std::is_unsigned_v<T>) {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(*v, &pos);
        require(pos == v->size() && v->find('-') == std::string::npos, ErrorCode::ConfigError, "");
        out = static_cast<T>(x);
      } else {
        out = static_cast<T>(parse_int(*v));
      }
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "bad value for '" + key + "': '" + *v + "'");
    }
  }

  void get_ints(const std::string& key, std::vector<int>& out) {
    const std::string* v = raw(key);
    if (v == nullptr) return;
    out.clear();
    try {
      for (const auto& part : split(*v, ',')) out.push_back(parse_int(part));
    } catch (const Error&) {
      fail(ErrorCode::ConfigError, "bad integer list for '" + key + "': '" + *v + "'");
    }
  }

  void get_counts(const std::string& key, std::array<std::size_t, 3>& out) {
    std::vector<int> v;
    get_ints(key, v);
    if (!raw(key)) return;
    require(v.size() == 3 && std::all_of(v.begin(), v.end(), [](int x) { return x >= 0; }), ErrorCode::ConfigError,
            "'" + key + "' needs three non-negative counts (va, au, expr)");
    for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<std::size_t>(v[i]);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv_)
      require(used_.count(key) != 0, ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string recurrent_name(RecurrentMode m) {
  switch (m) {
    case RecurrentMode::Single: return "single";
    case RecurrentMode::PerTap: return "per_tap";
    case RecurrentMode::None: break;
  }
  return "none";
}

RecurrentMode recurrent_from_name(const std::string& s) {
  if (s == "none") return RecurrentMode::None;
  if (s == "single") return RecurrentMode::Single;
  if (s == "per_tap") return RecurrentMode::PerTap;
  fail(ErrorCode::ConfigError, "recurrent must be none, single or per_tap");
}

std::string heads_name(const HeadSet& h) {
  std::vector<std::string> parts;
  if (h.va) parts.emplace_back("va");
  if (h.expr) parts.emplace_back("expr");
  if (h.au) parts.emplace_back("au");
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

HeadSet heads_from_name(const std::string& s) {
  HeadSet h{false, false, false};
  for (const auto& part : split(s, ',')) {
    if (part == "va") {
      h.va = true;
    } else if (part == "expr") {
      h.expr = true;
    } else if (part == "au") {
      h.au = true;
    } else {
      fail(ErrorCode::ConfigError, "heads are va, expr or au, got '" + part + "'");
    }
  }
  return h;
}

void read_model_spec(Reader& r, const std::string& prefix, ModelSpec& spec) {
  r.get_ints(prefix + "backbone", spec.backbone);
  r.get_ints(prefix + "taps", spec.taps);
  if (const std::string* v = r.raw(prefix + "recurrent")) spec.recurrent = recurrent_from_name(*v);
  r.get(prefix + "hidden", spec.hidden);
  r.get(prefix + "rnn_layers", spec.rnn_layers);
  r.get(prefix + "streams", spec.streams);
  r.get_ints(prefix + "audio_backbone", spec.audio_backbone);
  r.get(prefix + "fusion_width", spec.fusion_width);
  if (const std::string* v = r.raw(prefix + "heads")) spec.heads = heads_from_name(*v);
  r.get(prefix + "landmark_concat", spec.landmark_concat);
  r.get(prefix + "dropout", spec.dropout);
  r.get(prefix + "recurrent_dropout", spec.recurrent_dropout);
}

void write_model_spec(KeyValues& kv, const std::string& prefix, const ModelSpec& spec) {
  kv[prefix + "backbone"] = join_ints(spec.backbone);
  kv[prefix + "taps"] = join_ints(spec.taps);
  kv[prefix + "recurrent"] = recurrent_name(spec.recurrent);
  kv[prefix + "hidden"] = std::to_string(spec.hidden);
  kv[prefix + "rnn_layers"] = std::to_string(spec.rnn_layers);
  kv[prefix + "streams"] = std::to_string(spec.streams);
  kv[prefix + "audio_backbone"] = join_ints(spec.audio_backbone);
  kv[prefix + "fusion_width"] = std::to_string(spec.fusion_width);
  kv[prefix + "heads"] = heads_name(spec.heads);
  kv[prefix + "landmark_concat"] = spec.landmark_concat ? "1" : "0";
  kv[prefix + "dropout"] = format_double(spec.dropout);
  kv[prefix + "recurrent_dropout"] = format_double(spec.recurrent_dropout);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [key, value] : kv) out << key << " = " << value << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    require(kv.emplace(key, trim(line.substr(eq + 1))).second, ErrorCode::ConfigError, "repeated key '" + key + "'");
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IOError, "cannot open " + path.string());
  return parse_key_values(in);
}

std::string coupling_name(Coupling c) {
  switch (c) {
    case Coupling::CoAnnotation: return "coannotation";
    case Coupling::SoftCoAnnotation: return "soft_coannotation";
    case Coupling::DistrMatching: return "distr_matching";
    case Coupling::SoftAndDistr: return "soft+distr";
    case Coupling::None: break;
  }
  return "none";
}

Coupling coupling_from_name(const std::string& name) {
  for (Coupling c : {Coupling::None, Coupling::CoAnnotation, Coupling::SoftCoAnnotation, Coupling::DistrMatching,
                     Coupling::SoftAndDistr})
    if (coupling_name(c) == name) return c;
  fail(ErrorCode::ConfigError,
       "coupling must be none, coannotation, soft_coannotation, distr_matching or soft+distr; got '" + name + "'");
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
  RunConfig c;
  Reader r(kv);
  r.get("seed", c.seed);
  read_model_spec(r, "", c.model);
  int members = 0;
  r.get("fusion_members", members);
  require(members >= 0, ErrorCode::ConfigError, "fusion_members must be >= 0");
  if (members > 0) {
    std::vector<ModelSpec> specs(static_cast<std::size_t>(members));
    for (int i = 0; i < members; ++i) {
      specs[static_cast<std::size_t>(i)].heads = c.model.heads;
      read_model_spec(r, "member." + std::to_string(i) + ".", specs[static_cast<std::size_t>(i)]);
    }
    std::string trunk = "fc";
    r.get("trunk", trunk);
    require(trunk == "fc" || trunk == "rnn", ErrorCode::ConfigError, "trunk must be fc or rnn");
    int width = c.model.trunk_width;
    r.get("trunk_width", width);
    const HeadSet heads = c.model.heads;
    c.model = model_level_fuse_spec(specs, trunk == "rnn" ? FusionTrunk::Rnn : FusionTrunk::Fc, width);
    c.model.heads = heads;
  }
  r.get("lambda1", c.weights.lambda1);
  r.get("lambda2", c.weights.lambda2);
  if (const std::string* v = r.raw("coupling")) c.coupling = coupling_from_name(*v);
  r.get("relatedness", c.relatedness);
  r.get("reweight", c.reweight);
  r.get("lr", c.lr);
  r.get("lr_decay", c.lr_decay);
  r.get("decay_after", c.decay_after);
  r.get("batch_size", c.batch_size);
  r.get("seq_len", c.seq_len);
  r.get("epochs", c.epochs);
  r.get("data_dir", c.data_dir);
  r.get("out_dir", c.out_dir);
  r.get("init_from", c.init_from);
  r.get("freeze_encoder", c.freeze_encoder);
  r.reject_unknown();
  c.validate();
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  kv["seed"] = std::to_string(seed);
  if (model.members.empty()) {
    write_model_spec(kv, "", model);
  } else {
    kv["heads"] = heads_name(model.heads);
    kv["fusion_members"] = std::to_string(model.members.size());
    for (std::size_t i = 0; i < model.members.size(); ++i)
      write_model_spec(kv, "member." + std::to_string(i) + ".", model.members[i]);
    kv["trunk"] = model.trunk == FusionTrunk::Rnn ? "rnn" : "fc";
    kv["trunk_width"] = std::to_string(model.trunk_width);
  }
  kv["lambda1"] = format_double(weights.lambda1);
  kv["lambda2"] = format_double(weights.lambda2);
  kv["coupling"] = coupling_name(coupling);
  kv["relatedness"] = relatedness;
  kv["reweight"] = reweight ? "1" : "0";
  kv["lr"] = format_double(lr);
  kv["lr_decay"] = format_double(lr_decay);
  kv["decay_after"] = std::to_string(decay_after);
  kv["batch_size"] = std::to_string(batch_size);
  kv["seq_len"] = std::to_string(seq_len);
  kv["epochs"] = std::to_string(epochs);
  if (!data_dir.empty()) kv["data_dir"] = data_dir;
  if (!out_dir.empty()) kv["out_dir"] = out_dir;
  if (!init_from.empty()) kv["init_from"] = init_from;
  kv["freeze_encoder"] = freeze_encoder ? "1" : "0";
  return kv;
}

void RunConfig::validate() const {
  const auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  check(weights.lambda1 >= 0.0 && weights.lambda2 >= 0.0, "loss weights must be non-negative");
  check(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  check(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0,1]");
  check(decay_after >= 0, "decay_after must be >= 0");
  check(batch_size >= 1, "batch_size must be positive");
  check(seq_len >= 1, "seq_len must be positive");
  check(epochs >= 1, "epochs must be positive");
  if (coupling != Coupling::None)
    check(model.heads.expr && model.heads.au, "coupling needs both the EXPR and AU heads");
}

RunConfig load_run_config(const std::filesystem::path& path) { return RunConfig::from_key_values(load_key_values(path)); }

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  write_key_values(out, config.to_key_values());
}

SyntheticSpec SyntheticSpec::from_key_values(const KeyValues& kv) {
  SyntheticSpec s;
  Reader r(kv);
  r.get_counts("train", s.train);
  r.get_counts("val", s.val);
  r.get_counts("test", s.test);
  r.get("feature_dim", s.feature_dim);
  r.get("noise", s.noise);
  r.get("consistency", s.consistency);
  r.get("va_noise", s.va_noise);
  r.get("seq_len", s.seq_len);
  r.get("audio_dim", s.audio_dim);
  r.get("landmarks", s.landmarks);
  r.get("relatedness", s.relatedness);
  r.reject_unknown();
  s.validate();
  return s;
}

KeyValues SyntheticSpec::to_key_values() const {
  const auto counts = [](const std::array<std::size_t, 3>& c) {
    return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
  };
  return {{"train", counts(train)},
          {"val", counts(val)},
          {"test", counts(test)},
          {"feature_dim", std::to_string(feature_dim)},
          {"noise", format_double(noise)},
          {"consistency", format_double(consistency)},
          {"va_noise", format_double(va_noise)},
          {"seq_len", std::to_string(seq_len)},
          {"audio_dim", std::to_string(audio_dim)},
          {"landmarks", landmarks ? "1" : "0"},
          {"relatedness", relatedness}};
}

void SyntheticSpec::validate() const {
  const auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  check(feature_dim >= 1, "feature_dim must be positive");
  check(noise >= 0.0 && va_noise >= 0.0, "noise levels must be non-negative");
  check(consistency >= 0.0 && consistency <= 1.0, "consistency must lie in [0,1]");
  check(seq_len >= 1, "seq_len must be positive");
  check(audio_dim >= 0, "audio_dim must be non-negative");
}

// ---------------------------------------------------------------------------
// Synthetic data

ValenceArousal emotion_va_mean(Expression e) {
  switch (e) {
    case Expression::Neutral: return {0.0, 0.0};
    case Expression::Anger: return {-0.5, 0.6};
    case Expression::Disgust: return {-0.6, 0.3};
    case Expression::Fear: return {-0.6, 0.7};
    case Expression::Happiness: return {0.7, 0.5};
    case Expression::Sadness: return {-0.6, -0.4};
    case Expression::Surprise: return {0.3, 0.7};
  }
  return {};
}

std::vector<AnnotatedSample> generate_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const RelatednessTable table = relatedness_by_name(spec.relatedness);
  const auto rates = table.au_given_emotion(true);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_emotion(0, kNumExpressions - 1);

  const int f = spec.feature_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(f));
  Eigen::MatrixXd prototypes(kNumExpressions, f), au_dirs(kNumAUs, f), audio_protos(kNumExpressions, spec.audio_dim);
  for (Eigen::Index i = 0; i < prototypes.size(); ++i) prototypes.data()[i] = scale * normal(rng);
  for (Eigen::Index i = 0; i < au_dirs.size(); ++i) au_dirs.data()[i] = scale * normal(rng);
  for (Eigen::Index i = 0; i < audio_protos.size(); ++i) audio_protos.data()[i] = normal(rng);
  const LandmarkSet<double> face = canonical_template();

  std::vector<AnnotatedSample> out;
  const std::array<std::pair<Split, const std::array<std::size_t, 3>*>, 3> splits = {
      {{Split::Train, &spec.train}, {Split::Val, &spec.val}, {Split::Test, &spec.test}}};
  const std::array<Task, 3> slot_task = {Task::VA, Task::AU, Task::EXPR};
  for (const auto& [split, counts] : splits) {
    for (std::size_t slot = 0; slot < 3; ++slot) {
      const Task task = slot_task[slot];
      for (std::size_t n = 0; n < (*counts)[slot]; ++n) {
        const auto emotion = static_cast<Expression>(pick_emotion(rng));
        const int e = static_cast<int>(emotion);
        AUVector aus;
        const bool consistent = unit(rng) < spec.consistency;
        for (int i = 0; i < kNumAUs; ++i) {
          const bool from_row = unit(rng) < rates(e, i);
          const bool random = unit(rng) < 0.5;
          aus.set(kAuIds[static_cast<std::size_t>(i)], consistent ? from_row : random);
        }
        const ValenceArousal va_mean = emotion_va_mean(emotion);
        char base[64];
        std::snprintf(base, sizeof base, "%s-%s-%05zu", std::string(split_name(split)).c_str(),
                      std::string(task_name(task)).c_str(), n);
        for (int t = 0; t < spec.seq_len; ++t) {
          AnnotatedSample s;
          s.split = split;
          s.id = base;
          if (spec.seq_len > 1) {
            char frame[16];
            std::snprintf(frame, sizeof frame, "-f%03d", t);
            s.id += frame;
            s.sequence_id = base;
            s.frame_index = t;
          }
          s.features = prototypes.row(e).transpose();
          for (int i = 0; i < kNumAUs; ++i)
            if (aus.values[static_cast<std::size_t>(i)]) s.features += 0.5 * au_dirs.row(i).transpose();
          for (int k = 0; k < f; ++k) s.features[k] += spec.noise * normal(rng);
          if (spec.audio_dim > 0) {
            Eigen::VectorXd a = audio_protos.row(e).transpose();
            for (int k = 0; k < spec.audio_dim; ++k) a[k] += spec.noise * normal(rng);
            s.audio_features = a;
          }
          if (spec.landmarks) {
            Eigen::VectorXd lm(10);
            for (int p = 0; p < 5; ++p) {
              lm[2 * p] = face(p, 0) + normal(rng);
              lm[2 * p + 1] = face(p, 1) + normal(rng);
            }
            s.landmarks = lm;
          }
          switch (task) {
            case Task::VA:
              s.label = ValenceArousal{std::clamp(va_mean.valence + spec.va_noise * normal(rng), -1.0, 1.0),
                                       std::clamp(va_mean.arousal + spec.va_noise * normal(rng), -1.0, 1.0)};
              break;
            case Task::EXPR: s.label = emotion; break;
            case Task::AU: s.label = aus; break;
          }
          out.push_back(std::move(s));
        }
      }
    }
  }
  return out;
}

std::vector<AnnotatedSample> select_split(const std::vector<AnnotatedSample>& samples, Split split) {
  std::vector<AnnotatedSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [&](const AnnotatedSample& s) { return s.split == split; });
  return out;
}

ModelDims dataset_dims(const std::vector<AnnotatedSample>& samples) {
  require(!samples.empty(), ErrorCode::ConfigError, "dataset is empty");
  ModelDims dims;
  const AnnotatedSample& s = samples.front();
  dims.visual = s.features.size();
  dims.audio = s.audio_features ? s.audio_features->size() : 0;
  dims.landmarks = s.landmarks ? s.landmarks->size() : 0;
  for (const auto& x : samples) validate_sample(x, dims.visual);
  return dims;
}

// ---------------------------------------------------------------------------
// Batching

namespace {

/// Frames (indices into the sample list) fed to the model as one sequence.
struct Unit {
  std::vector<std::size_t> frames;
  Task task = Task::VA;
};

std::vector<Unit> sequences_of(const std::vector<AnnotatedSample>& samples) {
  std::vector<Unit> units;
  std::map<std::string, std::size_t> by_sequence;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.sequence_id) {
      units.push_back({{i}, s.task()});
      continue;
    }
    const auto [it, fresh] = by_sequence.emplace(*s.sequence_id, units.size());
    if (fresh) units.push_back({{}, s.task()});
    Unit& u = units[it->second];
    require(u.task == s.task(), ErrorCode::ConfigError, "sequence '" + *s.sequence_id + "' mixes label types");
    u.frames.push_back(i);
  }
  for (auto& u : units)
    std::stable_sort(u.frames.begin(), u.frames.end(), [&](std::size_t a, std::size_t b) {
      return samples[a].frame_index.value_or(0) < samples[b].frame_index.value_or(0);
    });
  return units;
}

/// Fixed-length training windows; the last window of a sequence is shifted
/// back so that it ends on the final frame.
std::vector<Unit> windows_of(const std::vector<AnnotatedSample>& samples, int seq_len) {
  const auto len = static_cast<std::size_t>(seq_len);
  std::vector<Unit> out;
  for (const auto& seq : sequences_of(samples)) {
    const std::size_t n = seq.frames.size();
    require(n >= len, ErrorCode::ConfigError,
            "sequence of " + std::to_string(n) + " frames is shorter than seq_len " + std::to_string(seq_len));
    for (std::size_t start = 0; start < n; start += len) {
      const std::size_t s = std::min(start, n - len);
      out.push_back({{seq.frames.begin() + static_cast<std::ptrdiff_t>(s),
                      seq.frames.begin() + static_cast<std::ptrdiff_t>(s + len)},
                     seq.task});
    }
  }
  return out;
}

SequenceBatch assemble(const std::vector<AnnotatedSample>& samples, const std::vector<const Unit*>& units) {
  SequenceBatch batch;
  const std::size_t steps = units.front()->frames.size();
  const auto rows = static_cast<Eigen::Index>(units.size());
  const AnnotatedSample& first = samples[units.front()->frames.front()];
  for (std::size_t t = 0; t < steps; ++t) {
    Eigen::MatrixXd v(rows, first.features.size());
    Eigen::MatrixXd a(rows, first.audio_features ? first.audio_features->size() : 0);
    Eigen::MatrixXd l(rows, first.landmarks ? first.landmarks->size() : 0);
    for (Eigen::Index b = 0; b < rows; ++b) {
      const AnnotatedSample& s = samples[units[static_cast<std::size_t>(b)]->frames[t]];
      v.row(b) = s.features.transpose();
      if (a.cols() > 0) {
        require(s.audio_features && s.audio_features->size() == a.cols(), ErrorCode::DimensionMismatch,
                "sample '" + s.id + "' lacks audio features");
        a.row(b) = s.audio_features->transpose();
      }
      if (l.cols() > 0) {
        require(s.landmarks && s.landmarks->size() == l.cols(), ErrorCode::DimensionMismatch,
                "sample '" + s.id + "' lacks landmarks");
        l.row(b) = s.landmarks->transpose();
      }
    }
    batch.visual.push_back(std::move(v));
    if (a.cols() > 0) batch.audio.push_back(std::move(a));
    if (l.cols() > 0) batch.landmarks.push_back(std::move(l));
  }
  return batch;
}

bool has_head(const HeadSet& heads, Task t) {
  switch (t) {
    case Task::VA: return heads.va;
    case Task::EXPR: return heads.expr;
    case Task::AU: return heads.au;
  }
  return false;
}

std::size_t slot_of(Task t) {
  switch (t) {
    case Task::VA: return 0;
    case Task::AU: return 1;
    case Task::EXPR: return 2;
  }
  return 0;
}

double mean_of(double sum, int n) { return n > 0 ? sum / n : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Training

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  std::set<std::string> val_keys;
  for (const auto& e : log)
    for (const auto& [k, v] : e.validation) val_keys.insert(k);
  out << "epoch,lr,total,emo,au,va,coupling";
  for (const auto& k : val_keys) out << ",val_" << k;
  out << '\n';
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.total) << ',' << format_double(e.emo) << ','
        << format_double(e.au) << ',' << format_double(e.va) << ',' << format_double(e.coupling);
    for (const auto& k : val_keys) {
      const auto it = e.validation.find(k);
      out << ',' << format_double(it == e.validation.end() ? kNaN : it->second);
    }
    out << '\n';
  }
}

TrainResult train_model(const RunConfig& config, const std::vector<AnnotatedSample>& train,
                        const std::vector<AnnotatedSample>& val) {
  config.validate();
  const ModelDims dims = dataset_dims(train);
  TrainResult result{Model::build(config.model, dims, config.seed), {}};
  Model& model = result.model;
  if (!config.init_from.empty()) {
    const ad::ParameterSet pretrained = ad::load_checkpoint(config.init_from);
    require(ad::copy_matching(pretrained, model.params()) > 0, ErrorCode::ConfigError,
            "no parameter of " + config.init_from + " matches the model");
  }
  model.freeze_encoder(config.freeze_encoder);
  const HeadSet heads = config.model.heads;
  const bool coupled = config.coupling != Coupling::None;
  const RelatednessTable table =
      coupled ? relatedness_by_name(config.relatedness) : RelatednessTable{};

  // Training units for the tasks this model can learn, split by task set.
  std::vector<Unit> units;
  for (auto& u : windows_of(train, config.seq_len))
    if (has_head(heads, u.task)) units.push_back(std::move(u));
  require(!units.empty(), ErrorCode::ConfigError, "no training samples for the model's heads");
  TaskPartition partition;
  for (std::size_t i = 0; i < units.size(); ++i) partition.ids[slot_of(units[i].task)].push_back(i);
  SetSizes sizes{};
  for (std::size_t k = 0; k < kTaskSets; ++k) sizes[k] = partition.ids[k].size();
  partition.batch = aligned_batch_sizes(sizes, config.batch_size);

  ad::Adam adam(ad::AdamConfig{config.lr});
  std::mt19937_64 dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  const auto T = static_cast<Eigen::Index>(config.seq_len);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, std::max(0, epoch - 1 - config.decay_after));
    adam.set_learning_rate(lr);
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    int steps = 0, n_emo = 0, n_au = 0, n_va = 0, n_coupling = 0;

    for (const AlignedBatch& aligned : plan_epoch(partition, config.seed, static_cast<std::uint64_t>(epoch - 1))) {
      std::vector<const Unit*> batch_units;
      for (const auto& slot : aligned.ids)
        for (std::size_t id : slot) batch_units.push_back(&units[id]);
      const SequenceBatch batch = assemble(train, batch_units);

      BatchLabels labels;
      std::vector<Eigen::Index> soft_rows;
      std::vector<SoftExpressionLabel> soft_labels;
      for (std::size_t b = 0; b < batch_units.size(); ++b) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const Eigen::Index row = static_cast<Eigen::Index>(b) * T + t;
          const AnnotatedSample& s = train[batch_units[b]->frames[static_cast<std::size_t>(t)]];
          if (const auto* va = std::get_if<ValenceArousal>(&s.label)) {
            labels.add_va(row, *va);
          } else if (const auto* e = std::get_if<Expression>(&s.label)) {
            labels.add_expr(row, *e);
            if (config.coupling == Coupling::CoAnnotation) {
              const auto targets = coannotate_emotion_to_aus(*e, table);
              if (!targets.empty()) {
                Eigen::Matrix<double, 1, kNumAUs> t_row = Eigen::Matrix<double, 1, kNumAUs>::Zero();
                Eigen::Matrix<double, 1, kNumAUs> w_row = Eigen::Matrix<double, 1, kNumAUs>::Zero();
                for (const auto& target : targets) {
                  t_row[au_index(target.au_id)] = target.target;
                  w_row[au_index(target.au_id)] = config.reweight ? target.weight : 1.0;
                }
                labels.add_au(row, t_row, w_row);
              }
            }
          } else {
            const auto& aus = std::get<AUVector>(s.label);
            labels.add_au(row, aus);
            if (config.coupling == Coupling::CoAnnotation) {
              if (const auto emotion = coannotate_aus_to_emotion(aus, table)) labels.add_expr(row, *emotion);
            } else if (config.coupling == Coupling::SoftCoAnnotation || config.coupling == Coupling::SoftAndDistr) {
              try {
                soft_labels.push_back(soft_coannotate(aus, table, config.reweight));
                soft_rows.push_back(row);
              } catch (const Error& err) {
                if (err.code() != ErrorCode::MissingMask) throw;
              }
            }
          }
        }
      }
      // The concordance term needs two VA rows.
      if (labels.va_rows.size() < 2) {
        labels.va_rows.clear();
        labels.va_truth.resize(0, 2);
      }

      ad::Tape tape;
      const BatchPredictions preds = model.forward(tape, batch, true, dropout_rng);
      for (const auto* out : {&preds.va, &preds.expr_logits, &preds.au_logits})
        require(!*out || (*out)->value().allFinite(), ErrorCode::DivergedLoss,
                "non-finite model outputs at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps + 1));
      const MultitaskLoss mt = multitask_loss(preds, labels, config.weights);
      Var total = mt.total;
      double coupling_value = 0.0;
      if (!soft_rows.empty()) {
        Eigen::MatrixXd soft(static_cast<Eigen::Index>(soft_rows.size()), kNumExpressions);
        for (std::size_t i = 0; i < soft_rows.size(); ++i) soft.row(static_cast<Eigen::Index>(i)) = soft_labels[i].transpose();
        const Var term = soft_target_cce(ad::gather_rows(*preds.expr_probs, soft_rows), soft);
        coupling_value += term.scalar();
        total = total + term;
      }
      if (config.coupling == Coupling::DistrMatching || config.coupling == Coupling::SoftAndDistr) {
        const Var term = distribution_matching_loss(*preds.expr_probs, *preds.au_probs, table, config.reweight);
        coupling_value += term.scalar();
        total = total + term;
      }
      const double loss = total.scalar();
      require(std::isfinite(loss), ErrorCode::DivergedLoss,
              "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps + 1) +
                  " (emo " + format_double(mt.emo.value_or(0.0)) + ", au " + format_double(mt.au.value_or(0.0)) +
                  ", va " + format_double(mt.va.value_or(0.0)) + ", coupling " + format_double(coupling_value) + ")");

      model.params().zero_grad();
      tape.backward(total);
      adam.step(model.params());

      ++steps;
      entry.total += loss;
      if (mt.emo) entry.emo += *mt.emo, ++n_emo;
      if (mt.au) entry.au += *mt.au, ++n_au;
      if (mt.va) entry.va += *mt.va, ++n_va;
      if (coupled) entry.coupling += coupling_value, ++n_coupling;
    }
    entry.total = mean_of(entry.total, steps);
    entry.emo = mean_of(entry.emo, n_emo);
    entry.au = mean_of(entry.au, n_au);
    entry.va = mean_of(entry.va, n_va);
    entry.coupling = mean_of(entry.coupling, n_coupling);
    if (!val.empty()) entry.validation = evaluate(model, val, heads).values();
    result.log.push_back(std::move(entry));
  }
  return result;
}

TrainResult run_training(const RunConfig& config) {
  require(!config.data_dir.empty() && !config.out_dir.empty(), ErrorCode::ConfigError,
          "training needs data_dir and out_dir");
  require(std::filesystem::is_directory(config.data_dir), ErrorCode::ConfigError,
          "data_dir '" + config.data_dir + "' does not exist");
  require(config.init_from.empty() || std::filesystem::exists(config.init_from), ErrorCode::ConfigError,
          "init_from '" + config.init_from + "' does not exist");
  const auto samples = load_dataset(config.data_dir);
  TrainResult result = train_model(config, select_split(samples, Split::Train), select_split(samples, Split::Val));
  const std::filesystem::path out = config.out_dir;
  std::filesystem::create_directories(out);
  save_run_config(out / "run.cfg", config);
  ad::save_checkpoint((out / "model.afmt").string(), result.model.params());
  std::ofstream log(out / "train_log.csv", std::ios::binary);
  require(log.good(), ErrorCode::IOError, "cannot write " + (out / "train_log.csv").string());
  write_training_log(log, result.log);
  return result;
}

Model load_trained_model(const std::filesystem::path& run_dir, const ModelDims& dims) {
  const RunConfig config = load_run_config(run_dir / "run.cfg");
  Model model = Model::build(config.model, dims, config.seed);
  const ad::ParameterSet saved = ad::load_checkpoint((run_dir / "model.afmt").string());
  require(saved.size() == model.params().size() && ad::copy_matching(saved, model.params()) == saved.size(),
          ErrorCode::IncompatibleHeads, "checkpoint does not match the model described by run.cfg");
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<PredictionRecord> predict_samples(Model& model, const std::vector<AnnotatedSample>& samples) {
  std::vector<PredictionRecord> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i].id = samples[i].id;
    out[i].frame_index = samples[i].frame_index.value_or(0);
  }
  const std::vector<Unit> units = sequences_of(samples);
  // Single frames are batched together; sequences run one at a time.
  std::vector<std::vector<const Unit*>> groups;
  std::vector<const Unit*> singles;
  for (const auto& u : units) {
    if (u.frames.size() == 1) {
      singles.push_back(&u);
      if (singles.size() == 256) groups.push_back(std::exchange(singles, {}));
    } else {
      groups.push_back({&u});
    }
  }
  if (!singles.empty()) groups.push_back(std::move(singles));

  const HeadSet heads = model.spec().heads;
  for (const auto& group : groups) {
    const FramePredictions p = model.predict(assemble(samples, group));
    const std::size_t T = group.front()->frames.size();
    for (std::size_t b = 0; b < group.size(); ++b) {
      for (std::size_t t = 0; t < T; ++t) {
        const auto row = static_cast<Eigen::Index>(b * T + t);
        PredictionRecord& r = out[group[b]->frames[t]];
        r.valence = heads.va ? p.va(row, 0) : kNaN;
        r.arousal = heads.va ? p.va(row, 1) : kNaN;
        if (heads.expr) {
          r.expr = p.expr.row(row).transpose();
        } else {
          r.expr.setConstant(kNaN);
        }
        if (heads.au) {
          r.au = p.au.row(row).transpose();
        } else {
          r.au.setConstant(kNaN);
        }
      }
    }
  }
  return out;
}

MetricReport evaluate(Model& model, const std::vector<AnnotatedSample>& samples, const HeadSet& tasks) {
  const HeadSet heads = model.spec().heads;
  require(!(tasks.va && !heads.va), ErrorCode::IncompatibleHeads, "VA requested but the model has no VA head");
  require(!(tasks.expr && !heads.expr), ErrorCode::IncompatibleHeads, "EXPR requested but the model has no EXPR head");
  require(!(tasks.au && !heads.au), ErrorCode::IncompatibleHeads, "AU requested but the model has no AU head");
  return evaluate_predictions(predict_samples(model, samples), samples, tasks);
}

MetricReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                  const std::vector<AnnotatedSample>& samples, const HeadSet& tasks) {
  require(predictions.size() == samples.size(), ErrorCode::LengthMismatch, "one prediction per sample is required");
  MetricReport report;
  std::vector<double> v_true, a_true, v_pred, a_pred;
  std::vector<int> e_true, e_pred;
  std::array<std::vector<int>, kNumAUs> au_true, au_pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PredictionRecord& p = predictions[i];
    const auto missing = [&](const char* task) {
      fail(ErrorCode::IncompatibleHeads, std::string(task) + " requested but '" + p.id + "' has no prediction");
    };
    if (const auto* va = std::get_if<ValenceArousal>(&samples[i].label); va && tasks.va) {
      if (!std::isfinite(p.valence) || !std::isfinite(p.arousal)) missing("VA");
      v_true.push_back(va->valence);
      a_true.push_back(va->arousal);
      v_pred.push_back(p.valence);
      a_pred.push_back(p.arousal);
    } else if (const auto* e = std::get_if<Expression>(&samples[i].label); e && tasks.expr) {
      if (!p.expr.allFinite()) missing("EXPR");
      Eigen::Index best = 0;
      p.expr.maxCoeff(&best);
      e_true.push_back(static_cast<int>(*e));
      e_pred.push_back(static_cast<int>(best));
    } else if (const auto* aus = std::get_if<AUVector>(&samples[i].label); aus && tasks.au) {
      if (!p.au.allFinite()) missing("AU");
      for (std::size_t k = 0; k < kNumAUs; ++k) {
        if (!aus->mask[k]) continue;
        au_true[k].push_back(aus->values[k]);
        au_pred[k].push_back(p.au[static_cast<Eigen::Index>(k)] >= 0.5 ? 1 : 0);
      }
    }
  }

  if (!v_true.empty()) {
    const auto as_vec = [](const std::vector<double>& x) {
      return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    };
    const auto cv = ccc(as_vec(v_true), as_vec(v_pred));
    const auto ca = ccc(as_vec(a_true), as_vec(a_pred));
    report.set("ccc_valence", cv.value);
    report.set("ccc_arousal", ca.value);
    report.set("ccc_mean", 0.5 * (cv.value + ca.value));
    report.set("mse_valence", mse(as_vec(v_true), as_vec(v_pred)));
    report.set("mse_arousal", mse(as_vec(a_true), as_vec(a_pred)));
    if (cv.degenerate) report.flag("ccc_valence");
    if (ca.degenerate) report.flag("ccc_arousal");
  }
  if (!e_true.empty()) {
    const double f1 = macro_f1(e_pred, e_true, kNumExpressions);
    const double acc = accuracy(e_pred, e_true);
    report.set("expr_f1", f1);
    report.set("expr_accuracy", acc);
    report.set("expr_e_total", e_total_expr(f1, acc));
    try {
      report.set("expr_mean_diagonal", mean_diagonal(confusion_matrix(e_pred, e_true, kNumExpressions)));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::EmptyRow) throw;
      report.flag("expr_mean_diagonal");
    }
  }
  double f1_sum = 0.0;
  int scored = 0;
  long correct = 0, total = 0;
  for (std::size_t k = 0; k < kNumAUs; ++k) {
    if (au_true[k].empty()) continue;
    const auto f1 = f1_binary(au_pred[k], au_true[k]);
    if (f1.degenerate) report.flag("au_f1_AU" + std::to_string(kAuIds[k]));
    f1_sum += f1.value;
    ++scored;
    for (std::size_t i = 0; i < au_true[k].size(); ++i) correct += au_true[k][i] == au_pred[k][i];
    total += static_cast<long>(au_true[k].size());
  }
  if (scored > 0) {
    const double mean_f1 = f1_sum / scored;
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    report.set("au_mean_f1", mean_f1);
    report.set("au_accuracy", acc);
    report.set("au_afa", 0.5 * (mean_f1 + acc));
    report.set("au_e_total", e_total_au(mean_f1, acc));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gradient checking

double gradient_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

namespace {

using LossFn = std::function<Var(ad::Tape&)>;

GradCheckResult check_case(const std::string& name, ad::ParameterSet& params, const LossFn& loss, int points,
                           std::mt19937_64& rng) {
  constexpr double kStep = 1e-5;
  params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  struct Coord {
    std::size_t p;
    Eigen::Index i;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (Eigen::Index i = 0; i < params[p].value.size(); ++i) coords.push_back({p, i});
  require(static_cast<int>(coords.size()) >= points, ErrorCode::InvalidSpec,
          name + ": fewer coordinates than requested points");
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(static_cast<std::size_t>(points));

  const auto eval = [&]() {
    ad::Tape tape;
    return loss(tape).scalar();
  };
  GradCheckResult result{name, 0.0, points};
  for (const auto& c : coords) {
    double& x = params[c.p].value.data()[c.i];
    const double saved = x;
    x = saved + kStep;
    const double up = eval();
    x = saved - kStep;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    result.max_rel_error =
        std::max(result.max_rel_error, gradient_rel_error(params[c.p].grad.data()[c.i], numeric));
  }
  return result;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::size_t add_random(ad::ParameterSet& params, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                       std::mt19937_64& rng) {
  ad::Parameter p;
  p.name = name;
  p.dims = {static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)};
  p.value = gaussian(rows, cols, rng);
  return params.add(std::move(p));
}

Eigen::MatrixXd distribution_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::MatrixXd m = gaussian(rows, cols, rng).array().exp().matrix();
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) /= m.row(r).sum();
  return m;
}

}  // namespace

std::vector<GradCheckResult> grad_check_all(std::uint64_t seed, int points) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;

  {  // dense layer
    ad::ParameterSet ps;
    const std::size_t w = add_random(ps, "W", 8, 7, rng);
    const std::size_t b = add_random(ps, "b", 1, 7, rng);
    const Eigen::MatrixXd x = gaussian(5, 8, rng);
    const Eigen::MatrixXd r = gaussian(5, 7, rng);
    results.push_back(check_case("dense", ps, [&](ad::Tape& t) {
      return ad::sum(ad::mul(ad::dense(t.constant(x), t.parameter(ps[w]), t.parameter(ps[b])), t.constant(r)));
    }, points, rng));
  }
  {  // GRU over four steps
    ad::ParameterSet ps;
    const ad::GruCell cell = ad::GruCell::create(ps, "gru", 4, 5);
    for (auto& p : ps) p.value = gaussian(p.value.rows(), p.value.cols(), rng, 0.5);
    std::vector<Eigen::MatrixXd> xs;
    for (int s = 0; s < 4; ++s) xs.push_back(gaussian(3, 4, rng));
    const Eigen::MatrixXd r = gaussian(3, 5, rng);
    results.push_back(check_case("gru", ps, [&](ad::Tape& t) {
      Var h = t.constant(Eigen::MatrixXd::Zero(3, 5));
      for (const auto& x : xs) h = ad::gru_step(t, ps, cell, t.constant(x), h);
      return ad::sum(ad::mul(h, t.constant(r)));
    }, points, rng));
  }
  {  // dropout at inference is the identity
    ad::ParameterSet ps;
    const std::size_t w = add_random(ps, "W", 8, 7, rng);
    const Eigen::MatrixXd x = gaussian(5, 8, rng);
    results.push_back(check_case("dropout (inference)", ps, [&](ad::Tape& t) {
      std::mt19937_64 unused(1);
      return ad::sum(ad::square(ad::dropout(ad::matmul(t.constant(x), t.parameter(ps[w])), 0.5, false, unused)));
    }, points, rng));
  }
  {  // dropout in training with a fixed mask
    ad::ParameterSet ps;
    const std::size_t w = add_random(ps, "W", 8, 7, rng);
    const Eigen::MatrixXd x = gaussian(5, 8, rng);
    results.push_back(check_case("dropout (training, fixed mask)", ps, [&](ad::Tape& t) {
      std::mt19937_64 mask_rng(seed + 17);
      return ad::sum(ad::square(ad::dropout(ad::matmul(t.constant(x), t.parameter(ps[w])), 0.3, true, mask_rng)));
    }, points, rng));
  }
  {  // concordance loss
    ad::ParameterSet ps;
    const std::size_t p = add_random(ps, "pred", 30, 2, rng);
    const Eigen::MatrixXd truth = gaussian(30, 2, rng, 0.5);
    results.push_back(check_case("ccc_loss", ps, [&](ad::Tape& t) { return ccc_loss(t.parameter(ps[p]), truth); },
                                 points, rng));
  }
  {  // categorical cross entropy
    ad::ParameterSet ps;
    const std::size_t p = add_random(ps, "logits", 10, kNumExpressions, rng);
    std::vector<int> truth(10);
    for (auto& y : truth) y = std::uniform_int_distribution<int>(0, kNumExpressions - 1)(rng);
    results.push_back(check_case("cce_loss", ps, [&](ad::Tape& t) { return cce_loss(t.parameter(ps[p]), truth); },
                                 points, rng));
  }
  {  // masked binary cross entropy with fractional weights
    ad::ParameterSet ps;
    const std::size_t p = add_random(ps, "logits", 6, kNumAUs, rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd targets(6, kNumAUs), weights(6, kNumAUs);
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
      targets.data()[i] = unit(rng) < 0.5 ? 1.0 : 0.0;
      const double u = unit(rng);
      weights.data()[i] = u < 0.3 ? 0.0 : u;
    }
    results.push_back(check_case("masked_bce_loss", ps, [&](ad::Tape& t) {
      return masked_bce_loss(t.parameter(ps[p]), targets, weights);
    }, points, rng));
  }
  {  // distribution matching through both heads
    ad::ParameterSet ps;
    const std::size_t e = add_random(ps, "expr_logits", 5, kNumExpressions, rng);
    const std::size_t a = add_random(ps, "au_logits", 5, kNumAUs, rng);
    for (bool reweight : {false, true}) {
      results.push_back(check_case(reweight ? "distribution_matching_loss (reweighted)" : "distribution_matching_loss",
                                   ps, [&](ad::Tape& t) {
        return distribution_matching_loss(ad::softmax_rows(t.parameter(ps[e])), ad::sigmoid(t.parameter(ps[a])),
                                          cognitive_table(), reweight);
      }, points, rng));
    }
  }
  {  // cross entropy with soft targets
    ad::ParameterSet ps;
    const std::size_t p = add_random(ps, "logits", 8, kNumExpressions, rng);
    const Eigen::MatrixXd soft = distribution_rows(8, kNumExpressions, rng);
    results.push_back(check_case("soft_target_cce", ps, [&](ad::Tape& t) {
      return soft_target_cce(ad::softmax_rows(t.parameter(ps[p])), soft);
    }, points, rng));
  }
  {  // weighted multi-task sum
    ad::ParameterSet ps;
    const std::size_t va = add_random(ps, "va", 12, 2, rng);
    const std::size_t ex = add_random(ps, "expr", 12, kNumExpressions, rng);
    const std::size_t au = add_random(ps, "au", 12, kNumAUs, rng);
    const Eigen::MatrixXd va_truth = gaussian(12, 2, rng, 0.5);
    std::vector<int> expr_truth(12);
    for (auto& y : expr_truth) y = std::uniform_int_distribution<int>(0, kNumExpressions - 1)(rng);
    Eigen::MatrixXd targets(12, kNumAUs);
    for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = (rng() & 1U) ? 1.0 : 0.0;
    const Eigen::MatrixXd weights = Eigen::MatrixXd::Ones(12, kNumAUs);
    results.push_back(check_case("multitask_sum", ps, [&](ad::Tape& t) {
      return multitask_sum(t, cce_loss(t.parameter(ps[ex]), expr_truth),
                           masked_bce_loss(t.parameter(ps[au]), targets, weights),
                           ccc_loss(t.parameter(ps[va]), va_truth), LossWeights{0.7, 0.3});
    }, points, rng));
  }
  {  // a full recurrent model with all heads, through the multi-task objective
    ModelSpec spec;
    spec.backbone = {6, 5};
    spec.taps = {0, 1};
    spec.recurrent = RecurrentMode::PerTap;
    spec.hidden = 4;
    const ModelDims dims{7, 0, 0};
    Model model = Model::build(spec, dims, seed);
    SequenceBatch batch;
    for (int s = 0; s < 3; ++s) batch.visual.push_back(gaussian(2, 7, rng));
    BatchLabels labels;
    labels.add_va(0, {0.3, -0.2});
    labels.add_va(1, {-0.5, 0.4});
    labels.add_va(4, {0.1, 0.6});
    labels.add_expr(2, Expression::Fear);
    labels.add_expr(5, Expression::Happiness);
    AUVector aus;
    aus.set(12, true);
    aus.set(25, false);
    aus.set(6, true);
    labels.add_au(3, aus);
    std::mt19937_64 unused(0);
    results.push_back(check_case("model (per-tap recurrent)", model.params(), [&](ad::Tape& t) {
      return multitask_loss(model.forward(t, batch, false, unused), labels, LossWeights{}).total;
    }, points, rng));
  }
  return results;
}

}  // namespace affect
