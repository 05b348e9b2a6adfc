// SPDX-License-Identifier: Apache-2.0
#include "affect/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <unsupported/Eigen/FFT>

#include "affect/binary.hpp"
#include "affect/io.hpp"

namespace affect {

LandmarkSet<double> canonical_template() {
  // Common 112x112 five-point template, rescaled to 96x96.
  LandmarkSet<double> t;
  t << 38.2946, 51.6963,
       73.5318, 51.5014,
       56.0252, 71.7366,
       41.5493, 92.3655,
       70.7299, 92.2041;
  return t * (96.0 / 112.0);
}

void SpectrogramConfig::validate() const {
  require(sample_rate_hz > 0.0, ErrorCode::ConfigError, "sample rate must be positive");
  require(window_ms > overlap_ms && overlap_ms > 0.0, ErrorCode::ConfigError, "need window_ms > overlap_ms > 0");
  require(!hop_override || *hop_override > 0, ErrorCode::ConfigError, "hop must be positive");
  require(window_samples() > 0 && hop_samples() > 0, ErrorCode::ConfigError, "window or hop rounds to zero samples");
}

std::size_t SpectrogramConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(window_ms * sample_rate_hz / 1000.0));
}

std::size_t SpectrogramConfig::hop_samples() const {
  if (hop_override) return *hop_override;
  return window_samples() - static_cast<std::size_t>(std::llround(overlap_ms * sample_rate_hz / 1000.0));
}

std::size_t SpectrogramConfig::fft_size() const { return std::bit_ceil(window_samples()); }

std::size_t frame_count(std::size_t n, const SpectrogramConfig& config) {
  config.validate();
  const std::size_t window = config.window_samples();
  require(n >= window, ErrorCode::SignalTooShort,
          "signal of " + std::to_string(n) + " samples is shorter than the " + std::to_string(window) + "-sample window");
  return (n - window) / config.hop_samples() + 1;
}

Eigen::MatrixXd stft_magnitudes(const Eigen::VectorXd& signal, const SpectrogramConfig& config) {
  const std::size_t frames = frame_count(static_cast<std::size_t>(signal.size()), config);
  const std::size_t window = config.window_samples();
  const std::size_t hop = config.hop_samples();
  const std::size_t nfft = config.fft_size();
  const std::size_t bins = config.bins();

  Eigen::FFT<double> fft;
  std::vector<double> frame(nfft, 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = 0; i < window; ++i) frame[i] = signal[static_cast<Eigen::Index>(f * hop + i)];
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < bins; ++k)
      out(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = std::abs(spectrum[k]);
  }
  return out;
}

Eigen::MatrixXd spectrogram(const Eigen::VectorXd& signal, const SpectrogramConfig& config) {
  Eigen::MatrixXd mag = stft_magnitudes(signal, config);
  const double lo = mag.minCoeff();
  const double hi = mag.maxCoeff();
  if (!(hi > lo)) return Eigen::MatrixXd::Zero(mag.rows(), mag.cols());
  return normalize_intensity(mag.array(), lo, hi).matrix();
}

AudioClip read_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IOError, "cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string rate_key, length_key;
  AudioClip clip;
  long long n = -1;
  hs >> rate_key >> clip.sample_rate_hz >> length_key >> n;
  require(hs && rate_key == "rate" && length_key == "length" && n >= 0, ErrorCode::ParseError,
          path.string() + ": expected header 'rate <R> length <N>'");
  clip.samples.resize(n);
  for (long long i = 0; i < n; ++i) clip.samples[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return clip;
}

void write_audio(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  out << "rate " << format_double(clip.sample_rate_hz) << " length " << clip.samples.size() << '\n';
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i) put_le(out, std::bit_cast<std::uint64_t>(clip.samples[i]));
  require(out.good(), ErrorCode::IOError, "failed writing " + path.string());
}

std::vector<std::pair<int, LandmarkSet<double>>> read_landmarks(const std::filesystem::path& path) {
  std::vector<std::pair<int, LandmarkSet<double>>> rows;
  for (const auto& fields : read_csv(path)) {
    if (!fields.empty() && fields[0] == "frame") continue;
    require(fields.size() == 11, ErrorCode::ParseError, path.string() + ": landmark rows need frame and 10 coordinates");
    LandmarkSet<double> lm;
    for (int p = 0; p < 5; ++p) {
      lm(p, 0) = parse_double(fields[static_cast<std::size_t>(1 + 2 * p)]);
      lm(p, 1) = parse_double(fields[static_cast<std::size_t>(2 + 2 * p)]);
    }
    rows.emplace_back(parse_int(fields[0]), lm);
  }
  return rows;
}

void write_landmarks(const std::filesystem::path& path, const std::vector<std::pair<int, LandmarkSet<double>>>& rows) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOError, "cannot write " + path.string());
  out << "frame,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5\n";
  for (const auto& [frame, lm] : rows) {
    out << frame;
    for (int p = 0; p < 5; ++p) out << ',' << format_double(lm(p, 0)) << ',' << format_double(lm(p, 1));
    out << '\n';
  }
}

}  // namespace affect
