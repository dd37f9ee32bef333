#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Cap standing in for +infinity when the estimate matches the reference.
inline constexpr double kSnrCapDb = 300.0;

namespace detail {

inline double restricted_energy(const Eigen::VectorXd& values,
                                const std::vector<Index>* restrict_to) {
  if (!restrict_to) return values.squaredNorm();
  double energy = 0.0;
  for (Index i : *restrict_to) energy += values[i] * values[i];
  return energy;
}

inline double snr_db_impl(const Signal& reference, const Signal& estimate,
                          const std::vector<Index>* restrict_to) {
  if (reference.samples.size() != estimate.samples.size())
    throw std::invalid_argument("snr: length mismatch");
  if (restrict_to) {
    for (Index i : *restrict_to)
      if (i < 0 || i >= reference.samples.size())
        throw std::invalid_argument("snr: restriction index out of range");
  }
  const double ref_energy =
      restricted_energy(reference.samples, restrict_to);
  if (ref_energy <= 0.0)
    throw MetricError("snr: reference energy is zero on the restriction");
  const Eigen::VectorXd err = reference.samples - estimate.samples;
  const double err_energy = restricted_energy(err, restrict_to);
  if (err_energy <= 0.0) return kSnrCapDb;
  const double snr = 10.0 * std::log10(ref_energy / err_energy);
  return std::min(snr, kSnrCapDb);
}

}  // namespace detail

// 10 log10(||y||^2 / ||y - y_hat||^2), capped at kSnrCapDb.
inline double snr_db(const Signal& reference, const Signal& estimate) {
  return detail::snr_db_impl(reference, estimate, nullptr);
}

// Same, with both energies restricted to the given sample indices
// (typically the gap positions).
inline double snr_db(const Signal& reference, const Signal& estimate,
                     const std::vector<Index>& restrict_to) {
  return detail::snr_db_impl(reference, estimate, &restrict_to);
}

// ||next - prev|| / ||prev||. Undefined when prev vanishes.
inline double relative_change(const Eigen::VectorXd& prev,
                              const Eigen::VectorXd& next) {
  if (prev.size() != next.size())
    throw std::invalid_argument("relative_change: length mismatch");
  const double denom = prev.norm();
  if (denom <= 0.0)
    throw MetricError("relative_change: previous iterate has zero norm");
  return (next - prev).norm() / denom;
}

// Per-iteration diagnostics row. Fields are absent when not computable
// (no reference signal, objective tracking off, first iteration).
struct MetricRecord {
  std::optional<double> snr_gap_db;
  std::optional<double> nll;
  std::optional<double> rel_solution_change;
  std::optional<double> rel_objective_change;
};

}  // namespace nmfip
