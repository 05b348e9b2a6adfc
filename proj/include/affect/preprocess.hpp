// SPDX-License-Identifier: Apache-2.0
//
// Input-side numerics: five-landmark affine face alignment, intensity
// normalization and magnitude spectrograms for the audio stream.
#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "affect/error.hpp"

namespace affect {

/// Rows: left eye, right eye, nose, left mouth corner, right mouth corner.
template <typename Scalar>
using LandmarkSet = Eigen::Matrix<Scalar, 5, 2>;

template <typename Scalar>
using Affine2 = Eigen::Matrix<Scalar, 2, 3>;

template <typename Scalar>
struct AlignmentFit {
  Affine2<Scalar> affine;
  /// Root of the summed squared point errors after alignment.
  Scalar residual;
};

/// Frontal template for a 96x96 crop.
LandmarkSet<double> canonical_template();

/// Least-squares 6-DOF affine mapping source onto canonical. Throws
/// DegenerateLandmarks for non-finite or (near-)collinear sources.
template <typename Scalar>
AlignmentFit<Scalar> fit_alignment(const LandmarkSet<Scalar>& source, const LandmarkSet<Scalar>& canonical) {
  require(source.allFinite() && canonical.allFinite(), ErrorCode::DegenerateLandmarks, "non-finite landmark");
  const Eigen::Matrix<Scalar, 5, 2> centered = source.rowwise() - source.colwise().mean();
  const Eigen::Matrix<Scalar, 2, 1> sv = Eigen::JacobiSVD<Eigen::Matrix<Scalar, 5, 2>>(centered).singularValues();
  require(sv[0] > Scalar(0) && sv[1] > Scalar(1e-9) * sv[0], ErrorCode::DegenerateLandmarks,
          "source landmarks are collinear");

  Eigen::Matrix<Scalar, 5, 3> design;
  design << source, Eigen::Matrix<Scalar, 5, 1>::Ones();
  const Eigen::Matrix<Scalar, 3, 2> solution = design.colPivHouseholderQr().solve(canonical);
  AlignmentFit<Scalar> fit;
  fit.affine = solution.transpose();
  fit.residual = std::sqrt((design * solution - canonical).squaredNorm());
  return fit;
}

/// Applies the affine to each row (x, y) of points.
template <typename Scalar, int Rows>
Eigen::Matrix<Scalar, Rows, 2> apply_alignment(const Affine2<Scalar>& affine,
                                               const Eigen::Matrix<Scalar, Rows, 2>& points) {
  return (points * affine.template leftCols<2>().transpose()).rowwise() + affine.col(2).transpose();
}

/// Linear map of [lo, hi] onto [-1, 1], clamped outside. Throws BadRange unless hi > lo.
template <typename Derived>
auto normalize_intensity(const Eigen::ArrayBase<Derived>& values, typename Derived::Scalar lo,
                         typename Derived::Scalar hi) {
  using Scalar = typename Derived::Scalar;
  require(hi > lo, ErrorCode::BadRange, "intensity range must satisfy hi > lo");
  return ((values.derived() - lo) * (Scalar(2) / (hi - lo)) - Scalar(1)).cwiseMax(Scalar(-1)).cwiseMin(Scalar(1)).eval();
}

struct SpectrogramConfig {
  double sample_rate_hz = 44100.0;
  double window_ms = 33.0;
  double overlap_ms = 11.0;
  /// Replaces window - overlap as the frame step when set.
  std::optional<std::size_t> hop_override;

  void validate() const;
  [[nodiscard]] std::size_t window_samples() const;
  [[nodiscard]] std::size_t hop_samples() const;
  /// Smallest power of two >= window_samples().
  [[nodiscard]] std::size_t fft_size() const;
  [[nodiscard]] std::size_t bins() const { return fft_size() / 2 + 1; }
};

/// floor((n - window) / hop) + 1; throws SignalTooShort when n < window.
std::size_t frame_count(std::size_t n, const SpectrogramConfig& config);

/// Frames x bins DFT magnitudes of rectangular, zero-padded frames.
Eigen::MatrixXd stft_magnitudes(const Eigen::VectorXd& signal, const SpectrogramConfig& config = {});

/// stft_magnitudes min-max scaled to [-1, 1] over the whole spectrogram; a
/// constant spectrogram maps to all zeros.
Eigen::MatrixXd spectrogram(const Eigen::VectorXd& signal, const SpectrogramConfig& config = {});

struct AudioClip {
  double sample_rate_hz = 44100.0;
  Eigen::VectorXd samples;
};

/// Text header line `rate <R> length <N>` followed by N little-endian doubles.
AudioClip read_audio(const std::filesystem::path& path);
void write_audio(const std::filesystem::path& path, const AudioClip& clip);

/// CSV rows `frame,x1,y1,...,x5,y5`; a header row starting with `frame` is skipped.
std::vector<std::pair<int, LandmarkSet<double>>> read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const std::vector<std::pair<int, LandmarkSet<double>>>& rows);

}  // namespace affect
