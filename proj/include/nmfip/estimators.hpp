#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nmfip/errors.hpp"
#include "nmfip/framing.hpp"
#include "nmfip/metrics.hpp"
#include "nmfip/nmf.hpp"
#include "nmfip/signal.hpp"
#include "nmfip/transforms.hpp"

namespace nmfip {

// Relative ridge added to the observed-sample covariance diagonal:
// eps = scale * trace(C11) / m. Zero disables it.
inline constexpr double kDefaultRidgeScale = 1e-8;

// Solves with an estimated condition number beyond this are treated as
// numerical breakdown.
inline constexpr double kMaxCondition = 1e14;

// Per-frame prior variances diag(WH)_n, all entries >= kVarianceFloor.
using FrameCovariance = Eigen::VectorXd;

// Posterior of one frame's coefficients given its observed samples.
// cov_full is populated only on request (the transported posterior needs
// it); cov_diag always holds the (clamped, nonnegative) diagonal.
struct PosteriorFrame {
  Eigen::VectorXcd mean;
  Eigen::VectorXd cov_diag;
  std::optional<Eigen::MatrixXcd> cov_full;
};

namespace detail {

// Shared conditioning kernel: with D = diag(prior), M the row selection of
// the observed positions and B = M T D, factor C11 = B (M T)* + ridge and
// back-substitute the observed samples. mean = B* C11^-1 x_obs is both the
// coefficient posterior mean and the alternating scheme's solution in
// coefficient space.
struct ConditioningKernel {
  Eigen::MatrixXcd scaled_rows;           // B = M T D, m x F
  Eigen::LDLT<Eigen::MatrixXcd> factor;   // of C11 + ridge
  Eigen::VectorXcd weights;               // C11^-1 x_obs
  Eigen::VectorXcd mean;                  // B* weights
};

inline ConditioningKernel condition_frame(
    const TransformPair& pair, const FrameCovariance& prior,
    const std::vector<Index>& observed,
    const Eigen::VectorXcd& observed_values, double ridge_scale) {
  const Index m = static_cast<Index>(observed.size());
  ConditioningKernel kernel;
  const Eigen::MatrixXcd rows = pair.synthesis()(observed, Eigen::all);
  kernel.scaled_rows =
      rows * prior.cast<std::complex<double>>().asDiagonal();
  Eigen::MatrixXcd c11 = kernel.scaled_rows * rows.adjoint();
  if (ridge_scale > 0.0) {
    const double ridge =
        ridge_scale * c11.diagonal().real().sum() / static_cast<double>(m);
    c11.diagonal().array() += ridge;
  }

  kernel.factor.compute(c11);
  if (kernel.factor.info() != Eigen::Success)
    throw NumericalError("observed covariance factorization failed");
  if ((kernel.factor.vectorD().real().array() <= 0.0).any())
    throw NumericalError("observed covariance is not positive definite");
  if (kernel.factor.rcond() < 1.0 / kMaxCondition)
    throw NumericalError("observed covariance condition number exceeds limit");

  kernel.weights = kernel.factor.solve(observed_values);
  kernel.mean = kernel.scaled_rows.adjoint() * kernel.weights;
  return kernel;
}

inline void check_frame_inputs(const TransformPair& pair,
                               const FrameCovariance& prior,
                               const std::vector<Index>& observed,
                               const Eigen::VectorXcd& observed_values) {
  if (prior.size() != pair.num_bins())
    throw std::invalid_argument("frame posterior: prior variance size mismatch");
  if ((prior.array() < 0.0).any())
    throw std::invalid_argument("frame posterior: negative prior variance");
  if (static_cast<Index>(observed.size()) != observed_values.size())
    throw std::invalid_argument("frame posterior: observation size mismatch");
  for (Index i : observed)
    if (i < 0 || i >= pair.frame_length())
      throw std::invalid_argument("frame posterior: observed index out of range");
}

}  // namespace detail

// Posterior mean and covariance of one frame's coefficients given the
// observed samples:
//   mean = D (M T)* C11^-1 x_obs,   C11 = (M T) D (M T)* + ridge I.
// With need_full_cov the dense D - B* C11^-1 B is materialized; otherwise
// only its diagonal is formed, entry f as D[f] - Re<B_f, (C11^-1 B)_f>.
inline PosteriorFrame e_step_frame(const TransformPair& pair,
                                   const FrameCovariance& prior_var,
                                   const std::vector<Index>& observed,
                                   const Eigen::VectorXcd& observed_values,
                                   bool need_full_cov,
                                   double ridge_scale = kDefaultRidgeScale) {
  detail::check_frame_inputs(pair, prior_var, observed, observed_values);
  const Index f = pair.num_bins();
  const FrameCovariance prior = prior_var.cwiseMax(kVarianceFloor);
  PosteriorFrame post;

  if (observed.empty()) {
    post.mean = Eigen::VectorXcd::Zero(f);
    post.cov_diag = prior;
    if (need_full_cov) post.cov_full = Eigen::MatrixXcd(prior.asDiagonal());
    return post;
  }
  if (static_cast<Index>(observed.size()) == pair.frame_length() &&
      pair.case_tag() == TransformCase::unitary_inverse) {
    // Fully observed and invertible: the coefficients are determined.
    post.mean = pair.analysis() * observed_values;
    post.cov_diag = Eigen::VectorXd::Zero(f);
    if (need_full_cov) post.cov_full = Eigen::MatrixXcd::Zero(f, f);
    return post;
  }

  detail::ConditioningKernel kernel = detail::condition_frame(
      pair, prior, observed, observed_values, ridge_scale);
  post.mean = std::move(kernel.mean);
  const Eigen::MatrixXcd solved = kernel.factor.solve(kernel.scaled_rows);
  if (need_full_cov) {
    Eigen::MatrixXcd cov = Eigen::MatrixXcd(prior.asDiagonal());
    cov.noalias() -= kernel.scaled_rows.adjoint() * solved;
    post.cov_diag = cov.diagonal().real().cwiseMax(0.0);
    post.cov_full = std::move(cov);
  } else {
    post.cov_diag.resize(f);
    for (Index j = 0; j < f; ++j)
      post.cov_diag[j] =
          prior[j] - kernel.scaled_rows.col(j).dot(solved.col(j)).real();
    post.cov_diag = post.cov_diag.cwiseMax(0.0);
  }
  return post;
}

// Posterior power p = |mean|^2 + diag(cov), the statistic the factor
// update fits.
inline Eigen::VectorXd posterior_power_tf(const PosteriorFrame& post) {
  return post.mean.cwiseAbs2() + post.cov_diag;
}

// Push a posterior through A T: mean' = (A T) mean,
// cov' = (A T) cov (A T)*. Requires the full covariance.
inline PosteriorFrame transport_posterior(const TransformPair& pair,
                                          const PosteriorFrame& post) {
  if (!post.cov_full)
    throw std::invalid_argument(
        "transport_posterior: full covariance required");
  if (post.mean.size() != pair.num_bins())
    throw std::invalid_argument("transport_posterior: size mismatch");
  const Eigen::MatrixXcd& proj = pair.projection();
  PosteriorFrame out;
  out.mean = proj * post.mean;
  out.cov_full = proj * (*post.cov_full) * proj.adjoint();
  out.cov_diag = out.cov_full->diagonal().real().cwiseMax(0.0);
  return out;
}

// One alternating-scheme signal update: the missing samples are set to
// their conditional expectation, frame = T D (M T)* C11^-1 x_obs, which
// reproduces the observed samples (exactly at zero ridge). coefs is the
// spectrum handed to the factor update: the posterior mean itself when the
// pair is invertible, A frame otherwise (the non-justified heuristic).
struct AmUpdate {
  Eigen::VectorXcd frame;
  Eigen::VectorXcd coefs;
};

inline AmUpdate am_signal_update(const TransformPair& pair,
                                 const FrameCovariance& prior_var,
                                 const std::vector<Index>& observed,
                                 const Eigen::VectorXcd& observed_values,
                                 double ridge_scale = kDefaultRidgeScale) {
  detail::check_frame_inputs(pair, prior_var, observed, observed_values);
  const FrameCovariance prior = prior_var.cwiseMax(kVarianceFloor);
  AmUpdate update;

  if (observed.empty()) {
    update.frame = Eigen::VectorXcd::Zero(pair.frame_length());
    update.coefs = Eigen::VectorXcd::Zero(pair.num_bins());
    return update;
  }
  if (static_cast<Index>(observed.size()) == pair.frame_length() &&
      pair.case_tag() == TransformCase::unitary_inverse) {
    update.frame = observed_values;
    update.coefs = pair.analysis() * observed_values;
    return update;
  }

  detail::ConditioningKernel kernel = detail::condition_frame(
      pair, prior, observed, observed_values, ridge_scale);
  update.frame = pair.synthesis() * kernel.mean;
  if (is_invertible_pair(pair))
    update.coefs = std::move(kernel.mean);
  else
    update.coefs = pair.projection() * kernel.mean;
  return update;
}

// Which negative log-likelihood to evaluate.
enum class Objective { observed_only, joint };

// observed_only: sum_n [ m_n log pi + log det C11_n + x* C11^-1 x ] over
// the observed samples, log-det taken from the LDLT factor diagonals.
// joint: exact complete-data value for an invertible pair,
// sum_n [ W log pi + 2 log|det T| + sum_f (log v + |(A x_n)_f|^2 / v) ]
// on the completed frames.
inline double neg_log_likelihood(Objective objective, const FrameSet& frames,
                                 const TransformPair& pair,
                                 const NmfModel& model,
                                 const Eigen::MatrixXcd& completed_frames =
                                     Eigen::MatrixXcd(),
                                 double ridge_scale = kDefaultRidgeScale) {
  const Index n_frames = frames.frames.cols();
  const Eigen::MatrixXd variances = model.product().cwiseMax(kVarianceFloor);
  if (variances.rows() != pair.num_bins() || variances.cols() != n_frames)
    throw std::invalid_argument("nll: model shape mismatch");
  constexpr double kLogPi = 1.1447298858494001741;  // log(pi)

  if (objective == Objective::joint) {
    if (!is_invertible_pair(pair))
      throw std::invalid_argument("nll: joint objective needs an invertible pair");
    if (completed_frames.rows() != pair.frame_length() ||
        completed_frames.cols() != n_frames)
      throw std::invalid_argument("nll: completed frames shape mismatch");
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(pair.synthesis());
    const double log_det_t =
        lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
    double total = 0.0;
    for (Index n = 0; n < n_frames; ++n) {
      const Eigen::VectorXcd coefs = pair.analysis() * completed_frames.col(n);
      total += static_cast<double>(pair.frame_length()) * kLogPi +
               2.0 * log_det_t;
      for (Index f = 0; f < pair.num_bins(); ++f) {
        const double v = variances(f, n);
        total += std::log(v) + std::norm(coefs[f]) / v;
      }
    }
    return total;
  }

  double total = 0.0;
  for (Index n = 0; n < n_frames; ++n) {
    const auto& observed = frames.frame_masks[static_cast<std::size_t>(n)];
    if (observed.empty()) continue;
    Eigen::VectorXcd x(static_cast<Index>(observed.size()));
    for (std::size_t i = 0; i < observed.size(); ++i)
      x[static_cast<Index>(i)] = frames.frames(observed[i], n);
    detail::ConditioningKernel kernel = detail::condition_frame(
        pair, variances.col(n), observed, x, ridge_scale);
    const double log_det =
        kernel.factor.vectorD().real().array().log().sum();
    const double quad = x.dot(kernel.weights).real();
    total += static_cast<double>(observed.size()) * kLogPi + log_det + quad;
  }
  return total;
}

enum class Algorithm { em_tf, em_t, am, am_to_em_tf };

inline std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::em_tf: return "em-tf";
    case Algorithm::em_t: return "em-t";
    case Algorithm::am: return "am";
    case Algorithm::am_to_em_tf: return "am-to-em-tf";
  }
  return "unknown";
}

struct FramingConfig {
  Index frame_length = 1024;
  Index hop = 512;
  Eigen::VectorXd window;  // empty selects the sine window
};

struct EstimatorConfig {
  Algorithm algorithm = Algorithm::em_tf;
  Index rank = 20;
  int outer_iters = 100;
  int nmf_inner_iters = 10;
  int switch_after = 5;  // am-to-em-tf only
  std::uint64_t seed = 0;
  double ridge_scale = kDefaultRidgeScale;
  bool track_objective = false;
  bool symmetric_init = true;
  bool allow_heuristic = false;  // alternating scheme on non-invertible pairs
  bool early_stop = false;       // halt after 3 consecutive changes < 1e-6
};

struct IterationRecord {
  int iteration = 0;                       // 1-based
  Algorithm algorithm = Algorithm::em_tf;  // phase that produced the row
  MetricRecord metrics;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<IterationRecord> records;
};

// Snapshot handed to the per-iteration observer. References stay valid
// only for the duration of the callback.
struct IterationView {
  int iteration;
  Algorithm algorithm;
  const Eigen::MatrixXcd& coefs;      // spectrum produced by this iteration
  const PowerSpectrum& power;         // statistic fed to the factor update
  const NmfModel& model;              // factors after the update
  const Eigen::VectorXd& solution;    // current reconstruction, pre-overwrite
};
using IterationObserver = std::function<void(const IterationView&)>;

struct EstimatorResult {
  Signal restored;
  NmfModel model;
  RunTrace trace;
  double max_imag_ratio = 0.0;  // final reconstruction, before the overwrite
  bool used_heuristic = false;
};

namespace detail {

inline constexpr double kEarlyStopThreshold = 1e-6;
inline constexpr int kEarlyStopStreak = 3;

inline Algorithm phase_for(const EstimatorConfig& cfg, int iteration) {
  if (cfg.algorithm != Algorithm::am_to_em_tf) return cfg.algorithm;
  return iteration <= cfg.switch_after ? Algorithm::am : Algorithm::em_tf;
}

}  // namespace detail

// Full estimation loop: frame the degraded signal, initialize the factors,
// then alternate per-frame posterior/signal updates with multiplicative
// factor updates for cfg.outer_iters iterations. The restored signal is the
// overlap-add of the synthesized frames with the observed samples copied
// back verbatim. ground_truth (optional) enables the per-iteration gap SNR
// column; observer (optional) sees each iteration's internals.
inline EstimatorResult run_estimator(const Signal& degraded,
                                     const GapMask& mask,
                                     const FramingConfig& framing,
                                     const TransformPair& pair,
                                     const EstimatorConfig& cfg,
                                     const Signal* ground_truth = nullptr,
                                     const IterationObserver& observer = {}) {
  if (pair.frame_length() != framing.frame_length)
    throw std::invalid_argument("estimator: pair/framing frame length mismatch");
  if (cfg.outer_iters < 1 || cfg.nmf_inner_iters < 1 || cfg.rank < 1)
    throw std::invalid_argument("estimator: iteration and rank counts must be positive");
  if (cfg.algorithm == Algorithm::am_to_em_tf &&
      (cfg.switch_after < 1 || cfg.switch_after >= cfg.outer_iters))
    throw std::invalid_argument("estimator: switch_after must lie inside the iteration range");
  const bool has_am_phase = cfg.algorithm == Algorithm::am ||
                            cfg.algorithm == Algorithm::am_to_em_tf;
  const bool heuristic_am = has_am_phase && !is_invertible_pair(pair);
  if (heuristic_am && !cfg.allow_heuristic)
    throw std::invalid_argument(
        "estimator: alternating scheme on a non-invertible pair is a "
        "heuristic; enable allow_heuristic to opt in");
  if (ground_truth && ground_truth->samples.size() != degraded.samples.size())
    throw std::invalid_argument("estimator: ground truth length mismatch");

  const Eigen::VectorXd window = framing.window.size() > 0
                                     ? framing.window
                                     : make_sine_window(framing.frame_length);
  const FrameSet frames =
      frame_signal(degraded, mask, framing.frame_length, framing.hop, window);
  const Index n_frames = frames.frames.cols();
  const Index n_bins = pair.num_bins();

  NmfModel model =
      init_model(n_bins, cfg.rank, n_frames, cfg.seed, cfg.symmetric_init);

  EstimatorResult result;
  result.used_heuristic = heuristic_am;

  Eigen::MatrixXcd coefs(n_bins, n_frames);
  Eigen::MatrixXcd synth(framing.frame_length, n_frames);
  PowerSpectrum power(n_bins, n_frames);
  Eigen::VectorXd solution;
  Eigen::VectorXd prev_solution;
  Eigen::VectorXcd accumulated;
  std::optional<double> prev_nll;
  int quiet_streak = 0;

  for (int iter = 1; iter <= cfg.outer_iters; ++iter) {
    const auto started = std::chrono::steady_clock::now();
    const Algorithm phase = detail::phase_for(cfg, iter);
    const Eigen::MatrixXd variances = model.product().cwiseMax(kVarianceFloor);

    for (Index n = 0; n < n_frames; ++n) {
      const auto& observed = frames.frame_masks[static_cast<std::size_t>(n)];
      Eigen::VectorXcd values(static_cast<Index>(observed.size()));
      for (std::size_t i = 0; i < observed.size(); ++i)
        values[static_cast<Index>(i)] = frames.frames(observed[i], n);
      try {
        switch (phase) {
          case Algorithm::em_tf: {
            const PosteriorFrame post =
                e_step_frame(pair, variances.col(n), observed, values,
                             false, cfg.ridge_scale);
            coefs.col(n) = post.mean;
            power.col(n) = posterior_power_tf(post);
            synth.col(n) = pair.synthesis() * post.mean;
            break;
          }
          case Algorithm::em_t: {
            const PosteriorFrame post =
                e_step_frame(pair, variances.col(n), observed, values,
                             true, cfg.ridge_scale);
            const PosteriorFrame moved = transport_posterior(pair, post);
            coefs.col(n) = moved.mean;
            power.col(n) = posterior_power_tf(moved);
            synth.col(n) = pair.synthesis() * moved.mean;
            break;
          }
          case Algorithm::am: {
            const AmUpdate update = am_signal_update(
                pair, variances.col(n), observed, values, cfg.ridge_scale);
            coefs.col(n) = update.coefs;
            power.col(n) = update.coefs.cwiseAbs2();
            synth.col(n) = update.frame;
            break;
          }
          case Algorithm::am_to_em_tf:
            break;  // resolved to a concrete phase above
        }
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (frame " +
                                 std::to_string(n) + ", iteration " +
                                 std::to_string(iter) + ")",
                             static_cast<long>(n), iter);
      }
    }

    model = multiplicative_update(model, power, cfg.nmf_inner_iters);

    accumulated = overlap_add_complex(synth, window, framing.hop,
                                      frames.signal_length);
    solution = accumulated.real();

    IterationRecord record;
    record.iteration = iter;
    record.algorithm = phase;
    if (ground_truth && !mask.missing.empty()) {
      try {
        record.metrics.snr_gap_db = snr_db(
            *ground_truth, Signal{solution, degraded.sample_rate},
            mask.missing);
      } catch (const MetricError&) {
        record.metrics.snr_gap_db = std::nullopt;
      }
    }
    if (cfg.track_objective) {
      try {
        if (phase == Algorithm::am) {
          Eigen::MatrixXcd completed = synth;
          for (Index n = 0; n < n_frames; ++n)
            for (Index p :
                 frames.frame_masks[static_cast<std::size_t>(n)])
              completed(p, n) = frames.frames(p, n);
          record.metrics.nll =
              neg_log_likelihood(Objective::joint, frames, pair, model,
                                 completed, cfg.ridge_scale);
        } else {
          record.metrics.nll = neg_log_likelihood(
              Objective::observed_only, frames, pair, model,
              Eigen::MatrixXcd(), cfg.ridge_scale);
        }
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (objective, iteration " +
                                 std::to_string(iter) + ")",
                             -1, iter);
      }
      if (prev_nll && *prev_nll != 0.0)
        record.metrics.rel_objective_change =
            std::abs(*record.metrics.nll - *prev_nll) / std::abs(*prev_nll);
      prev_nll = record.metrics.nll;
    }
    if (iter > 1 && prev_solution.norm() > 0.0)
      record.metrics.rel_solution_change =
          relative_change(prev_solution, solution);
    prev_solution = solution;
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    result.trace.records.push_back(record);

    if (observer)
      observer(IterationView{iter, phase, coefs, power, model, solution});

    if (cfg.early_stop) {
      const auto& change = record.metrics.rel_solution_change;
      quiet_streak =
          (change && *change < detail::kEarlyStopThreshold) ? quiet_streak + 1
                                                            : 0;
      if (quiet_streak >= detail::kEarlyStopStreak) break;
    }
  }

  result.max_imag_ratio = imag_ratio(accumulated);
  if (result.max_imag_ratio > kImagTolerance)
    throw SymmetryError("estimator: reconstruction imaginary residual exceeds tolerance");

  result.restored = Signal{solution, degraded.sample_rate};
  std::size_t k = 0;
  for (Index i = 0; i < degraded.samples.size(); ++i) {
    if (k < mask.missing.size() && mask.missing[k] == i) {
      ++k;
      continue;
    }
    result.restored.samples[i] = degraded.samples[i];
  }
  result.model = std::move(model);
  return result;
}

}  // namespace nmfip
