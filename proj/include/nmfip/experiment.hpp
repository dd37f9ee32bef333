#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "nmfip/degrade.hpp"
#include "nmfip/errors.hpp"
#include "nmfip/estimators.hpp"
#include "nmfip/metrics.hpp"
#include "nmfip/wav.hpp"

namespace nmfip {

inline constexpr const char* kVersion = "1.0.0";

// Complete description of one restoration run.
struct ExperimentSpec {
  std::filesystem::path input_path;
  std::optional<std::filesystem::path> reference_path;  // mask-file mode only
  Degradation degradation;
  FramingConfig framing;
  Index num_bins = 0;  // 0 selects num_bins = frame_length
  EstimatorConfig estimator;
  std::filesystem::path out_dir;
};

struct ExperimentSummary {
  Signal restored;
  RunTrace trace;
  std::optional<double> final_snr_gap_db;
  std::optional<double> peak_snr_gap_db;
  std::optional<int> peak_iteration;
  double max_imag_ratio = 0.0;
  bool used_heuristic = false;
  int source_channels = 1;
  Index missing_count = 0;
  std::filesystem::path restored_path;
  std::filesystem::path mask_path;
  std::filesystem::path trace_path;
  std::filesystem::path summary_path;
};

namespace detail {

// Shortest round-trippable decimal form, C locale, for the CSV.
inline std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string();
}

}  // namespace detail

// trace.csv: one row per iteration, empty cells for absent values, LF line
// endings. wall_ms is the only column that varies between reruns of the
// same spec and seed.
inline void write_trace_csv(const std::filesystem::path& path,
                            const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace file: " + path.string());
  out << "iter,algorithm,snr_gap_db,nll,rel_solution_change,"
         "rel_objective_change,wall_ms\n";
  for (const IterationRecord& r : trace.records) {
    out << r.iteration << ',' << to_string(r.algorithm) << ','
        << detail::format_optional(r.metrics.snr_gap_db) << ','
        << detail::format_optional(r.metrics.nll) << ','
        << detail::format_optional(r.metrics.rel_solution_change) << ','
        << detail::format_optional(r.metrics.rel_objective_change) << ','
        << detail::format_double(r.wall_ms) << '\n';
  }
  if (!out) throw IoError("failed writing trace file: " + path.string());
}

namespace detail {

inline nlohmann::json degradation_json(const Degradation& degradation,
                                       const GapMask& mask) {
  nlohmann::json j;
  if (std::holds_alternative<RandomDrop>(degradation)) {
    j["mode"] = "random-drop";
    j["drop_fraction"] = std::get<RandomDrop>(degradation).fraction;
  } else if (std::holds_alternative<CompactGaps>(degradation)) {
    const auto& gaps = std::get<CompactGaps>(degradation);
    j["mode"] = "compact-gaps";
    j["count"] = gaps.count;
    j["gap_ms"] = gaps.gap_ms;
    j["min_context_ms"] = gaps.min_context_ms;
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& [start, length] : mask_runs(mask))
      placements.push_back({start, length});
    j["placements"] = placements;
  } else {
    j["mode"] = "mask-file";
    j["path"] = std::get<MaskFilePath>(degradation).path.string();
  }
  j["missing_count"] = static_cast<long long>(mask.missing.size());
  return j;
}

inline nlohmann::json optional_json(const std::optional<double>& value) {
  if (value) return *value;
  return nullptr;
}

}  // namespace detail

// Run one experiment end to end: load, degrade, restore, and write the
// four artifacts (restored.wav, mask.txt, trace.csv, summary.json) into
// spec.out_dir. The restored samples equal the input on every observed
// position; SNR columns appear whenever a reference signal is available
// (the pristine input for generated degradations, reference_path for
// mask-file runs).
inline ExperimentSummary run_experiment(const ExperimentSpec& spec) {
  const WavData input = load_wav(spec.input_path);
  if (input.source_channels > 1)
    std::cerr << "warning: input has " << input.source_channels
              << " channels; downmixed to mono by averaging\n";

  const GapMask mask =
      make_gaps(input.signal, spec.degradation, spec.estimator.seed);

  Signal degraded = input.signal;
  for (Index i : mask.missing) degraded.samples[i] = 0.0;

  std::optional<Signal> reference;
  if (std::holds_alternative<MaskFilePath>(spec.degradation)) {
    if (spec.reference_path) {
      const WavData ref = load_wav(*spec.reference_path);
      if (ref.signal.samples.size() != degraded.samples.size())
        throw std::invalid_argument("experiment: reference length mismatch");
      reference = ref.signal;
    }
  } else {
    reference = input.signal;
  }

  const Index num_bins =
      spec.num_bins > 0 ? spec.num_bins : spec.framing.frame_length;
  const TransformPair pair =
      make_dft_pair(spec.framing.frame_length, num_bins);

  const EstimatorResult run = run_estimator(
      degraded, mask, spec.framing, pair, spec.estimator,
      reference ? &*reference : nullptr);

  std::filesystem::create_directories(spec.out_dir);
  ExperimentSummary summary;
  summary.restored = run.restored;
  summary.trace = run.trace;
  summary.max_imag_ratio = run.max_imag_ratio;
  summary.used_heuristic = run.used_heuristic;
  summary.source_channels = input.source_channels;
  summary.missing_count = static_cast<Index>(mask.missing.size());
  summary.restored_path = spec.out_dir / "restored.wav";
  summary.mask_path = spec.out_dir / "mask.txt";
  summary.trace_path = spec.out_dir / "trace.csv";
  summary.summary_path = spec.out_dir / "summary.json";

  for (const IterationRecord& r : run.trace.records) {
    if (!r.metrics.snr_gap_db) continue;
    summary.final_snr_gap_db = r.metrics.snr_gap_db;
    if (!summary.peak_snr_gap_db ||
        *r.metrics.snr_gap_db > *summary.peak_snr_gap_db) {
      summary.peak_snr_gap_db = r.metrics.snr_gap_db;
      summary.peak_iteration = r.iteration;
    }
  }

  save_wav(summary.restored_path, run.restored);
  save_gap_mask(summary.mask_path, mask);
  write_trace_csv(summary.trace_path, run.trace);

  nlohmann::json j;
  j["version"] = kVersion;
  j["input"] = {{"path", spec.input_path.string()},
                {"sample_rate", input.signal.sample_rate},
                {"length", static_cast<long long>(input.signal.samples.size())},
                {"source_channels", input.source_channels}};
  j["degradation"] = detail::degradation_json(spec.degradation, mask);
  j["framing"] = {{"frame_length", static_cast<long long>(spec.framing.frame_length)},
                  {"hop", static_cast<long long>(spec.framing.hop)},
                  {"window", "sine"},
                  {"num_bins", static_cast<long long>(num_bins)}};
  j["estimator"] = {{"algorithm", to_string(spec.estimator.algorithm)},
                    {"rank", static_cast<long long>(spec.estimator.rank)},
                    {"outer_iters", spec.estimator.outer_iters},
                    {"nmf_inner_iters", spec.estimator.nmf_inner_iters},
                    {"switch_after", spec.estimator.switch_after},
                    {"seed", spec.estimator.seed},
                    {"ridge_scale", spec.estimator.ridge_scale},
                    {"track_objective", spec.estimator.track_objective},
                    {"symmetric_init", spec.estimator.symmetric_init},
                    {"allow_heuristic", spec.estimator.allow_heuristic},
                    {"early_stop", spec.estimator.early_stop}};
  j["results"] = {{"iterations", static_cast<int>(run.trace.records.size())},
                  {"final_snr_gap_db", detail::optional_json(summary.final_snr_gap_db)},
                  {"peak_snr_gap_db", detail::optional_json(summary.peak_snr_gap_db)},
                  {"peak_iteration", summary.peak_iteration
                                         ? nlohmann::json(*summary.peak_iteration)
                                         : nlohmann::json(nullptr)},
                  {"max_imag_ratio", run.max_imag_ratio},
                  {"am_heuristic", run.used_heuristic}};
  if (run.used_heuristic)
    j["notes"] = nlohmann::json::array(
        {"alternating scheme ran without an invertible transform; its "
         "coefficient update is a non-justified heuristic"});
  j["artifacts"] = {{"restored", summary.restored_path.string()},
                    {"mask", summary.mask_path.string()},
                    {"trace", summary.trace_path.string()},
                    {"summary", summary.summary_path.string()}};
  std::ofstream out(summary.summary_path, std::ios::binary);
  if (!out) throw IoError("cannot write summary file: " + summary.summary_path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing summary file: " + summary.summary_path.string());
  return summary;
}

}  // namespace nmfip
