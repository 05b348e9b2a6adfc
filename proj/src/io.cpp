// SPDX-License-Identifier: Apache-2.0
#include "affect/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "affect/error.hpp"

namespace affect {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IOError, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  return out;
}

template <typename Vec>
std::string join(const Vec& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_double(v[i]);
  }
  return s;
}

template <typename Vec>
Vec parse_list(const std::string& s, const std::string& what) {
  const auto parts = split(s, ';');
  Vec v;
  require(static_cast<Eigen::Index>(parts.size()) == v.size(), ErrorCode::ParseError,
          what + " needs " + std::to_string(v.size()) + " values");
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = parse_double(parts[static_cast<std::size_t>(i)]);
  return v;
}

std::map<std::string, Eigen::VectorXd> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::map<std::string, Eigen::VectorXd> rows;
  const auto csv = read_csv(in);
  for (std::size_t r = 0; r < csv.size(); ++r) {
    const auto& fields = csv[r];
    if (r == 0 && !fields.empty() && fields[0] == "id") continue;
    require(fields.size() >= 2, ErrorCode::ParseError, path.string() + ": feature row without values");
    Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size() - 1));
    for (std::size_t i = 1; i < fields.size(); ++i) v[static_cast<Eigen::Index>(i - 1)] = parse_double(fields[i]);
    require(rows.emplace(fields[0], std::move(v)).second, ErrorCode::ParseError,
            path.string() + ": duplicate id '" + fields[0] + "'");
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc{} && ptr == t.data() + t.size() && !t.empty(), ErrorCode::ParseError,
          "not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  const std::string t = trim(s);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  require(ec == std::errc{} && ptr == t.data() + t.size() && !t.empty(), ErrorCode::ParseError,
          "not an integer: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return read_csv(in);
}

std::string au_payload(const AUVector& aus) {
  std::string s(kNumAUs, '-');
  for (int i = 0; i < kNumAUs; ++i)
    if (aus.mask[static_cast<std::size_t>(i)]) s[static_cast<std::size_t>(i)] = aus.values[static_cast<std::size_t>(i)] ? '1' : '0';
  return s;
}

AUVector parse_au_payload(const std::string& payload) {
  require(payload.size() == kNumAUs, ErrorCode::ParseError, "AU payload needs 17 characters: '" + payload + "'");
  AUVector aus;
  for (std::size_t i = 0; i < kNumAUs; ++i) {
    const char c = payload[i];
    require(c == '0' || c == '1' || c == '-', ErrorCode::ParseError, "AU payload characters are 0, 1 or -");
    aus.mask[i] = c != '-';
    aus.values[i] = c == '1';
  }
  return aus;
}

void write_annotations(std::ostream& out, const std::vector<AnnotatedSample>& samples) {
  out << "id,split,sequence_id,utterance_id,frame_index,task,payload\n";
  for (const auto& s : samples) {
    out << s.id << ',' << split_name(s.split) << ',' << s.sequence_id.value_or("") << ','
        << s.utterance_id.value_or("") << ',';
    if (s.frame_index) out << *s.frame_index;
    out << ',' << task_name(s.task()) << ',';
    std::visit(
        [&](const auto& label) {
          using T = std::decay_t<decltype(label)>;
          if constexpr (std::is_same_v<T, ValenceArousal>) {
            out << format_double(label.valence) << ';' << format_double(label.arousal);
          } else if constexpr (std::is_same_v<T, Expression>) {
            out << static_cast<int>(label);
          } else {
            out << au_payload(label);
          }
        },
        s.label);
    out << '\n';
  }
}

std::vector<AnnotatedSample> read_annotations(std::istream& in) {
  const auto csv = read_csv(in);
  require(!csv.empty() && csv[0].size() == 7 && csv[0][0] == "id", ErrorCode::ParseError,
          "annotation file needs the header id,split,sequence_id,utterance_id,frame_index,task,payload");
  std::vector<AnnotatedSample> samples;
  for (std::size_t r = 1; r < csv.size(); ++r) {
    const auto& f = csv[r];
    require(f.size() == 7, ErrorCode::ParseError, "annotation row " + std::to_string(r) + " needs 7 fields");
    AnnotatedSample s;
    s.id = f[0];
    s.split = split_from_name(f[1]);
    if (!f[2].empty()) s.sequence_id = f[2];
    if (!f[3].empty()) s.utterance_id = f[3];
    if (!f[4].empty()) s.frame_index = parse_int(f[4]);
    if (f[5] == "VA") {
      const auto parts = split(f[6], ';');
      require(parts.size() == 2, ErrorCode::ParseError, "VA payload is v;a");
      s.label = ValenceArousal{parse_double(parts[0]), parse_double(parts[1])};
    } else if (f[5] == "EXPR") {
      s.label = expression_from_index(parse_int(f[6]));
    } else if (f[5] == "AU") {
      s.label = parse_au_payload(f[6]);
    } else {
      fail(ErrorCode::ParseError, "unknown task '" + f[5] + "'");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_feature_rows(std::ostream& out, const std::vector<std::string>& ids,
                        const std::vector<const Eigen::VectorXd*>& rows) {
  const Eigen::Index dim = rows.empty() ? 0 : rows.front()->size();
  out << "id";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",f" << i;
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r]->size() == dim, ErrorCode::DimensionMismatch, "feature rows differ in length");
    out << ids[r];
    for (Eigen::Index i = 0; i < dim; ++i) out << ',' << format_double((*rows[r])[i]);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedSample>& samples) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out = open_out(dir / "annotations.csv");
    write_annotations(out, samples);
  }
  auto write_stream = [&](const char* file, auto get) {
    std::vector<std::string> ids;
    std::vector<const Eigen::VectorXd*> rows;
    for (const auto& s : samples)
      if (const Eigen::VectorXd* v = get(s)) {
        ids.push_back(s.id);
        rows.push_back(v);
      }
    if (rows.empty() && std::string(file) != "features.csv") return;
    std::ofstream out = open_out(dir / file);
    write_feature_rows(out, ids, rows);
    require(out.good(), ErrorCode::IOError, "failed writing " + (dir / file).string());
  };
  write_stream("features.csv", [](const AnnotatedSample& s) { return &s.features; });
  write_stream("audio.csv", [](const AnnotatedSample& s) { return s.audio_features ? &*s.audio_features : nullptr; });
  write_stream("landmarks.csv", [](const AnnotatedSample& s) { return s.landmarks ? &*s.landmarks : nullptr; });
}

std::vector<AnnotatedSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in = open_in(dir / "annotations.csv");
  std::vector<AnnotatedSample> samples = read_annotations(in);
  const auto features = read_feature_file(dir / "features.csv");
  std::map<std::string, Eigen::VectorXd> audio, landmarks;
  if (std::filesystem::exists(dir / "audio.csv")) audio = read_feature_file(dir / "audio.csv");
  if (std::filesystem::exists(dir / "landmarks.csv")) landmarks = read_feature_file(dir / "landmarks.csv");
  for (auto& s : samples) {
    const auto it = features.find(s.id);
    require(it != features.end(), ErrorCode::ParseError, "no feature row for '" + s.id + "'");
    s.features = it->second;
    if (const auto a = audio.find(s.id); a != audio.end()) s.audio_features = a->second;
    if (const auto l = landmarks.find(s.id); l != landmarks.end()) s.landmarks = l->second;
  }
  return samples;
}

void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  out << "id,frame_index,valence,arousal,expr,au\n";
  for (const auto& r : records)
    out << r.id << ',' << r.frame_index << ',' << format_double(r.valence) << ',' << format_double(r.arousal) << ','
        << join(r.expr) << ',' << join(r.au) << '\n';
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out = open_out(path);
  write_predictions(out, records);
  require(out.good(), ErrorCode::IOError, "failed writing " + path.string());
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  const auto csv = read_csv(in);
  std::vector<PredictionRecord> records;
  for (std::size_t r = 0; r < csv.size(); ++r) {
    const auto& f = csv[r];
    if (r == 0 && !f.empty() && f[0] == "id") continue;
    require(f.size() == 6, ErrorCode::ParseError, "prediction row " + std::to_string(r) + " needs 6 fields");
    PredictionRecord p;
    p.id = f[0];
    p.frame_index = parse_int(f[1]);
    p.valence = parse_double(f[2]);
    p.arousal = parse_double(f[3]);
    p.expr = parse_list<ExpressionProbs>(f[4], "expr");
    p.au = parse_list<AuProbs>(f[5], "au");
    records.push_back(std::move(p));
  }
  return records;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return read_predictions(in);
}

}  // namespace affect
