#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Which synthesis/analysis pairing a TransformPair realizes:
//   unitary_inverse   square unitary T, A = T^-1 = T*
//   redundant_tight   T T* = I with more bins than samples, A = T*
//   analysis_tight    A T = I with fewer bins than samples, A = T*
//   pinv_of_synthesis A = pinv(T) for an arbitrary T
//   pinv_of_analysis  T = pinv(A) for an arbitrary A
enum class TransformCase {
  unitary_inverse,
  redundant_tight,
  analysis_tight,
  pinv_of_synthesis,
  pinv_of_analysis,
};

inline std::string to_string(TransformCase tag) {
  switch (tag) {
    case TransformCase::unitary_inverse: return "unitary-inverse";
    case TransformCase::redundant_tight: return "redundant-tight";
    case TransformCase::analysis_tight: return "analysis-tight";
    case TransformCase::pinv_of_synthesis: return "pinv-of-synthesis";
    case TransformCase::pinv_of_analysis: return "pinv-of-analysis";
  }
  return "unknown";
}

namespace detail {

// Unitary inverse-DFT matrix: U[t,f] = exp(2 pi i t f / size) / sqrt(size).
// The phase is reduced mod size before evaluation to keep it accurate at
// large t*f products.
inline Eigen::MatrixXcd unitary_inverse_dft(Index size) {
  Eigen::MatrixXcd m(size, size);
  const double scale = 1.0 / std::sqrt(static_cast<double>(size));
  for (Index t = 0; t < size; ++t)
    for (Index f = 0; f < size; ++f)
      m(t, f) = std::polar(
          scale, 2.0 * std::numbers::pi *
                     static_cast<double>((t * f) % size) /
                     static_cast<double>(size));
  return m;
}

inline Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-12 * (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace detail

// Immutable synthesis/analysis operator pair. synthesis() is
// frame_length x num_bins, analysis() num_bins x frame_length, both stored
// dense. The case invariants are verified at construction: exactly (dense
// products) up to 1024 bins, by randomized matvec probes above that.
// projection() caches A*T on first use under a once_flag, so concurrent
// readers are safe.
class TransformPair {
 public:
  TransformPair(Eigen::MatrixXcd synthesis, Eigen::MatrixXcd analysis,
                TransformCase tag)
      : synthesis_(std::move(synthesis)),
        analysis_(std::move(analysis)),
        tag_(tag),
        cache_(std::make_shared<Cache>()) {
    if (synthesis_.rows() == 0 || synthesis_.cols() == 0)
      throw std::invalid_argument("transform pair: empty operator");
    if (analysis_.rows() != synthesis_.cols() ||
        analysis_.cols() != synthesis_.rows())
      throw std::invalid_argument("transform pair: shape mismatch");
    verify_invariants();
  }

  const Eigen::MatrixXcd& synthesis() const noexcept { return synthesis_; }
  const Eigen::MatrixXcd& analysis() const noexcept { return analysis_; }
  TransformCase case_tag() const noexcept { return tag_; }
  Index frame_length() const noexcept { return synthesis_.rows(); }
  Index num_bins() const noexcept { return synthesis_.cols(); }

  // A*T, num_bins x num_bins. Computed once, then shared.
  const Eigen::MatrixXcd& projection() const {
    std::call_once(cache_->once,
                   [this] { cache_->projection = analysis_ * synthesis_; });
    return cache_->projection;
  }

 private:
  struct Cache {
    std::once_flag once;
    Eigen::MatrixXcd projection;
  };

  void verify_invariants() const {
    const Index w = frame_length();
    const Index f = num_bins();
    // Roundoff in the verification products grows with the size; widen the
    // gate slightly for the large operators while tests pin 1e-12 at small
    // sizes.
    const double tol = (std::max(w, f) <= 2048) ? 1e-12 : 1e-11;
    switch (tag_) {
      case TransformCase::unitary_inverse:
        if (f != w)
          throw std::invalid_argument("transform pair: unitary case needs square T");
        if (f <= 1024) {
          require_identity(analysis_ * synthesis_, tol, "A T = I");
          require_identity(synthesis_ * analysis_, tol, "T A = I");
          require_identity(synthesis_ * synthesis_.adjoint(), tol, "T T* = I");
        } else {
          probe_identity(tol);
        }
        break;
      case TransformCase::redundant_tight:
        if (f <= w)
          throw std::invalid_argument("transform pair: redundant case needs more bins");
        if (f <= 1024) {
          require_identity(synthesis_ * synthesis_.adjoint(), tol, "T T* = I");
        } else {
          probe_rows_tight(tol);
        }
        break;
      case TransformCase::analysis_tight:
        if (f >= w)
          throw std::invalid_argument("transform pair: analysis-tight case needs fewer bins");
        if (f <= 1024) {
          require_identity(analysis_ * synthesis_, tol, "A T = I");
        } else {
          probe_identity(tol);
        }
        break;
      case TransformCase::pinv_of_synthesis:
      case TransformCase::pinv_of_analysis: {
        // Both products must be orthogonal projections.
        require_projection(analysis_ * synthesis_, tol, "A T");
        require_projection(synthesis_ * analysis_, tol, "T A");
        break;
      }
    }
  }

  static void require_identity(const Eigen::MatrixXcd& m, double tol,
                               const char* what) {
    const double dev =
        (m - Eigen::MatrixXcd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
    if (dev > tol)
      throw std::invalid_argument(std::string("transform pair: ") + what +
                                  " violated, deviation " + std::to_string(dev));
  }

  static void require_projection(const Eigen::MatrixXcd& m, double tol,
                                 const char* what) {
    const double idem = (m * m - m).cwiseAbs().maxCoeff();
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (idem > tol || herm > tol)
      throw std::invalid_argument(std::string("transform pair: ") + what +
                                  " is not an orthogonal projection");
  }

  // Randomized probes for the large DFT-backed operators: A(Tv) = v.
  void probe_identity(double tol) const {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> dist;
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXcd v(num_bins());
      for (Index i = 0; i < v.size(); ++i)
        v[i] = std::complex<double>(dist(rng), dist(rng));
      const double dev =
          (analysis_ * (synthesis_ * v) - v).cwiseAbs().maxCoeff() /
          v.cwiseAbs().maxCoeff();
      if (dev > tol * static_cast<double>(num_bins()))
        throw std::invalid_argument("transform pair: A T = I probe failed");
    }
  }

  // Probes T T* u = u for the redundant tight case.
  void probe_rows_tight(double tol) const {
    std::mt19937_64 rng(0xda942042e4dd58b5ull);
    std::normal_distribution<double> dist;
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXcd u(frame_length());
      for (Index i = 0; i < u.size(); ++i)
        u[i] = std::complex<double>(dist(rng), dist(rng));
      const double dev =
          (synthesis_ * (synthesis_.adjoint() * u) - u).cwiseAbs().maxCoeff() /
          u.cwiseAbs().maxCoeff();
      if (dev > tol * static_cast<double>(num_bins()))
        throw std::invalid_argument("transform pair: T T* = I probe failed");
    }
  }

  Eigen::MatrixXcd synthesis_;
  Eigen::MatrixXcd analysis_;
  TransformCase tag_;
  std::shared_ptr<Cache> cache_;
};

// DFT-backed pair. num_bins == frame_length gives the unitary inverse DFT
// with A = T*; num_bins == 2 * frame_length keeps the first frame_length
// rows of the double-size unitary inverse DFT (a tight frame, equivalent to
// zero-padded analysis), again with A = T*. Other ratios are unsupported.
inline TransformPair make_dft_pair(Index frame_length, Index num_bins) {
  if (frame_length < 2)
    throw std::invalid_argument("dft pair: frame_length must be >= 2");
  if (num_bins == frame_length) {
    Eigen::MatrixXcd t = detail::unitary_inverse_dft(frame_length);
    Eigen::MatrixXcd a = t.adjoint();
    return TransformPair(std::move(t), std::move(a),
                         TransformCase::unitary_inverse);
  }
  if (num_bins == 2 * frame_length) {
    Eigen::MatrixXcd full = detail::unitary_inverse_dft(num_bins);
    Eigen::MatrixXcd t = full.topRows(frame_length);
    Eigen::MatrixXcd a = t.adjoint();
    return TransformPair(std::move(t), std::move(a),
                         TransformCase::redundant_tight);
  }
  throw std::invalid_argument(
      "dft pair: num_bins must equal frame_length or twice it");
}

// Analysis-tight pair with fewer bins than samples: T keeps the first
// num_bins columns of the frame_length-point unitary inverse DFT, A = T*,
// so A T = I on the coefficient space.
inline TransformPair make_analysis_tight_pair(Index frame_length,
                                              Index num_bins) {
  if (num_bins < 1 || num_bins >= frame_length)
    throw std::invalid_argument(
        "analysis-tight pair: need 1 <= num_bins < frame_length");
  Eigen::MatrixXcd full = detail::unitary_inverse_dft(frame_length);
  Eigen::MatrixXcd t = full.leftCols(num_bins);
  Eigen::MatrixXcd a = t.adjoint();
  return TransformPair(std::move(t), std::move(a),
                       TransformCase::analysis_tight);
}

// General pairs: the missing operator is the Moore-Penrose pseudo-inverse
// (SVD with singular values below 1e-12 * sigma_max treated as zero).
inline TransformPair pair_from_synthesis(Eigen::MatrixXcd synthesis) {
  Eigen::MatrixXcd analysis = detail::pseudo_inverse(synthesis);
  return TransformPair(std::move(synthesis), std::move(analysis),
                       TransformCase::pinv_of_synthesis);
}

inline TransformPair pair_from_analysis(Eigen::MatrixXcd analysis) {
  Eigen::MatrixXcd synthesis = detail::pseudo_inverse(analysis);
  return TransformPair(std::move(synthesis), std::move(analysis),
                       TransformCase::pinv_of_analysis);
}

inline Eigen::VectorXcd apply_synthesis(const TransformPair& pair,
                                        const Eigen::VectorXcd& coefs) {
  if (coefs.size() != pair.num_bins())
    throw std::invalid_argument("apply_synthesis: coefficient size mismatch");
  return pair.synthesis() * coefs;
}

// True when A inverts T exactly (square pair with A T = I), the setting in
// which the alternating scheme's coefficient update is justified.
inline bool is_invertible_pair(const TransformPair& pair) {
  if (pair.num_bins() != pair.frame_length()) return false;
  if (pair.case_tag() == TransformCase::unitary_inverse) return true;
  const Eigen::MatrixXcd& p = pair.projection();
  return (p - Eigen::MatrixXcd::Identity(p.rows(), p.cols()))
             .cwiseAbs()
             .maxCoeff() < 1e-10;
}

}  // namespace nmfip
