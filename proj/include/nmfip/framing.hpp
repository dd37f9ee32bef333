#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Overlap-add output must be real up to this relative imaginary residual.
inline constexpr double kImagTolerance = 1e-6;

// Sine window w[t] = sin(pi (t + 0.5) / length). Applied at both analysis
// and synthesis, adjacent 50%-overlapped frames sum to sin^2 + cos^2 = 1,
// so interior samples reconstruct exactly.
inline Eigen::VectorXd make_sine_window(Index length) {
  if (length < 2 || length % 2 != 0)
    throw std::invalid_argument("window: length must be even and >= 2");
  Eigen::VectorXd window(length);
  for (Index t = 0; t < length; ++t)
    window[t] = std::sin(std::numbers::pi * (static_cast<double>(t) + 0.5) /
                         static_cast<double>(length));
  return window;
}

// Windowed frames of a signal plus the per-frame observation pattern.
// frames is frame_length x num_frames; frame_masks[n] holds the observed
// positions (within [0, frame_length)) of frame n, sorted ascending.
// Positions that fall past the signal end are zero padding and count as
// observed. signal_length and sample_rate are carried for reconstruction.
struct FrameSet {
  Eigen::MatrixXcd frames;
  Index frame_length = 0;
  Index hop = 0;
  Eigen::VectorXd window;
  std::vector<std::vector<Index>> frame_masks;
  Index signal_length = 0;
  int sample_rate = 0;
};

inline Index frame_count(Index signal_length, Index frame_length, Index hop) {
  if (signal_length <= frame_length) return 1;
  return (signal_length - frame_length + hop - 1) / hop + 1;
}

inline FrameSet frame_signal(const Signal& signal, const GapMask& mask,
                             Index frame_length, Index hop,
                             const Eigen::VectorXd& window) {
  validate_signal(signal);
  const Index length = signal.samples.size();
  if (frame_length < 2 || frame_length % 2 != 0)
    throw std::invalid_argument("framing: frame_length must be even and >= 2");
  if (frame_length > length)
    throw std::invalid_argument("framing: frame_length exceeds signal length");
  if (hop * 2 != frame_length)
    throw std::invalid_argument("framing: only 50% overlap (hop = length/2) is supported");
  if (window.size() != frame_length)
    throw std::invalid_argument("framing: window length mismatch");
  if (!mask.missing.empty() &&
      (mask.missing.front() < 0 || mask.missing.back() >= length))
    throw std::invalid_argument("framing: mask index out of range");

  std::vector<char> is_missing(static_cast<std::size_t>(length), 0);
  for (Index i : mask.missing) is_missing[static_cast<std::size_t>(i)] = 1;

  FrameSet fs;
  fs.frame_length = frame_length;
  fs.hop = hop;
  fs.window = window;
  fs.signal_length = length;
  fs.sample_rate = signal.sample_rate;
  const Index n_frames = frame_count(length, frame_length, hop);
  fs.frames.setZero(frame_length, n_frames);
  fs.frame_masks.resize(static_cast<std::size_t>(n_frames));

  for (Index n = 0; n < n_frames; ++n) {
    auto& observed = fs.frame_masks[static_cast<std::size_t>(n)];
    observed.reserve(static_cast<std::size_t>(frame_length));
    for (Index p = 0; p < frame_length; ++p) {
      const Index t = n * hop + p;
      if (t < length) {
        fs.frames(p, n) = window[p] * signal.samples[t];
        if (!is_missing[static_cast<std::size_t>(t)]) observed.push_back(p);
      } else {
        observed.push_back(p);  // zero padding, treated as observed zeros
      }
    }
  }
  return fs;
}

// Weighted overlap-add without the realness gate; also used by estimators
// to track intermediate (possibly complex) reconstructions.
inline Eigen::VectorXcd overlap_add_complex(const Eigen::MatrixXcd& frames,
                                            const Eigen::VectorXd& window,
                                            Index hop, Index signal_length) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(signal_length);
  for (Index n = 0; n < frames.cols(); ++n) {
    const Index base = n * hop;
    const Index limit = std::min(frames.rows(), signal_length - base);
    for (Index p = 0; p < limit; ++p)
      acc[base + p] += window[p] * frames(p, n);
  }
  return acc;
}

// Relative imaginary residual max|Im| / max|Re| (0 when both are zero,
// infinity when only the real part vanishes).
inline double imag_ratio(const Eigen::VectorXcd& values) {
  const double max_re = values.real().cwiseAbs().maxCoeff();
  const double max_im = values.imag().cwiseAbs().maxCoeff();
  if (max_im == 0.0) return 0.0;
  if (max_re == 0.0) return std::numeric_limits<double>::infinity();
  return max_im / max_re;
}

// y[t] = sum_n window[t - n hop] frames[n][t - n hop], truncated to the
// original length. Throws SymmetryError when the accumulated imaginary
// part exceeds kImagTolerance relative to the real part.
inline Signal overlap_add(const FrameSet& fs) {
  if (fs.window.size() != fs.frame_length || fs.frames.rows() != fs.frame_length)
    throw std::invalid_argument("overlap_add: inconsistent frame set");
  Eigen::VectorXcd acc =
      overlap_add_complex(fs.frames, fs.window, fs.hop, fs.signal_length);
  if (imag_ratio(acc) > kImagTolerance)
    throw SymmetryError("overlap_add: imaginary residual exceeds tolerance");
  return Signal{acc.real(), fs.sample_rate};
}

}  // namespace nmfip
