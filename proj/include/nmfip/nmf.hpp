#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Floor applied to factor entries and to power/variance values before
// they enter a ratio or a logarithm.
inline constexpr double kVarianceFloor = 1e-10;

// Nonnegative power matrix, num_bins x num_frames.
using PowerSpectrum = Eigen::MatrixXd;

// Nonnegative factor pair. basis is num_bins x rank with unit 2-norm
// columns after each normalization; activation is rank x num_frames.
struct NmfModel {
  Eigen::MatrixXd basis;
  Eigen::MatrixXd activation;

  Index rank() const noexcept { return basis.cols(); }
  Eigen::MatrixXd product() const { return basis * activation; }
};

namespace detail {

inline void check_nonnegative(const Eigen::MatrixXd& m, const char* name) {
  if ((m.array() < 0.0).any())
    throw std::invalid_argument(std::string(name) + ": negative entry");
}

}  // namespace detail

// Itakura-Saito divergence sum_{f,n} (p/v - log(p/v) - 1). p is floored at
// kVarianceFloor; v entries must already be >= the floor. Accumulated with
// Kahan compensation so large grids do not drift.
inline double is_divergence(const PowerSpectrum& power,
                            const Eigen::MatrixXd& approx) {
  if (power.rows() != approx.rows() || power.cols() != approx.cols())
    throw std::invalid_argument("is_divergence: shape mismatch");
  detail::check_nonnegative(power, "is_divergence: power");
  detail::check_nonnegative(approx, "is_divergence: approx");
  double sum = 0.0;
  double comp = 0.0;
  for (Index n = 0; n < power.cols(); ++n) {
    for (Index f = 0; f < power.rows(); ++f) {
      const double p = std::max(power(f, n), kVarianceFloor);
      const double v = std::max(approx(f, n), kVarianceFloor);
      const double ratio = p / v;
      const double term = ratio - std::log(ratio) - 1.0;
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  return sum;
}

// Rescale basis columns to unit 2-norm and activation rows inversely, which
// leaves the product unchanged.
inline void normalize_columns(NmfModel& model) {
  for (Index k = 0; k < model.rank(); ++k) {
    const double norm = model.basis.col(k).norm();
    if (norm <= 0.0) continue;
    model.basis.col(k) /= norm;
    model.activation.row(k) *= norm;
  }
}

// Multiplicative Itakura-Saito updates. Each inner iteration updates the
// basis from the current product, recomputes the product, updates the
// activation, floors all entries at kVarianceFloor, then renormalizes.
// The divergence to `power` is non-increasing across iterations.
inline NmfModel multiplicative_update(NmfModel model,
                                      const PowerSpectrum& power,
                                      int inner_iters) {
  if (inner_iters < 1)
    throw std::invalid_argument("nmf update: inner_iters must be >= 1");
  if (power.rows() != model.basis.rows() ||
      power.cols() != model.activation.cols())
    throw std::invalid_argument("nmf update: shape mismatch");
  detail::check_nonnegative(power, "nmf update: power");
  detail::check_nonnegative(model.basis, "nmf update: basis");
  detail::check_nonnegative(model.activation, "nmf update: activation");

  const Eigen::MatrixXd p = power.cwiseMax(kVarianceFloor);
  for (int it = 0; it < inner_iters; ++it) {
    Eigen::MatrixXd v = model.product().cwiseMax(kVarianceFloor);
    Eigen::MatrixXd vinv = v.cwiseInverse();
    Eigen::MatrixXd ratio = p.cwiseProduct(vinv).cwiseProduct(vinv);
    model.basis = model.basis
                      .cwiseProduct(ratio * model.activation.transpose())
                      .cwiseQuotient(vinv * model.activation.transpose())
                      .cwiseMax(kVarianceFloor);

    v = model.product().cwiseMax(kVarianceFloor);
    vinv = v.cwiseInverse();
    ratio = p.cwiseProduct(vinv).cwiseProduct(vinv);
    model.activation = model.activation
                           .cwiseProduct(model.basis.transpose() * ratio)
                           .cwiseQuotient(model.basis.transpose() * vinv)
                           .cwiseMax(kVarianceFloor);

    normalize_columns(model);
  }
  return model;
}

// Seeded random factors: |N(0,1)| + 0.1 entries from mt19937_64, basis
// drawn column by column, then the activation. With symmetric = true the
// basis rows are mirrored (row f copied from row num_bins - f) so variances
// inherit the conjugate symmetry of real-signal spectra. Columns are
// normalized before returning.
inline NmfModel init_model(Index num_bins, Index rank, Index num_frames,
                           std::uint64_t seed, bool symmetric = true) {
  if (num_bins < 1 || rank < 1 || num_frames < 1)
    throw std::invalid_argument("nmf init: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  NmfModel model;
  model.basis.resize(num_bins, rank);
  for (Index k = 0; k < rank; ++k)
    for (Index f = 0; f < num_bins; ++f)
      model.basis(f, k) = std::abs(dist(rng)) + 0.1;
  model.activation.resize(rank, num_frames);
  for (Index n = 0; n < num_frames; ++n)
    for (Index k = 0; k < rank; ++k)
      model.activation(k, n) = std::abs(dist(rng)) + 0.1;
  if (symmetric) {
    for (Index f = num_bins / 2 + 1; f < num_bins; ++f)
      model.basis.row(f) = model.basis.row(num_bins - f);
  }
  normalize_columns(model);
  return model;
}

}  // namespace nmfip
