#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <variant>
#include <vector>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Drop a uniform random fraction of all samples.
struct RandomDrop {
  double fraction = 0.5;  // in (0, 1)
};

// Drop `count` disjoint runs of gap_ms milliseconds, pairwise separated by
// at least min_context_ms of observed signal.
struct CompactGaps {
  int count = 1;
  double gap_ms = 20.0;
  double min_context_ms = 0.0;
};

// Load the missing indices from a mask file instead of generating them.
struct MaskFilePath {
  std::filesystem::path path;
};

using Degradation = std::variant<RandomDrop, CompactGaps, MaskFilePath>;

namespace detail {

inline GapMask random_drop_mask(Index length, double fraction,
                                std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("degrade: drop fraction must lie in (0, 1)");
  const Index count = static_cast<Index>(
      std::llround(fraction * static_cast<double>(length)));
  if (count >= length)
    throw InfeasibleSpecError("degrade: drop fraction leaves no observed samples");
  std::vector<Index> pool(static_cast<std::size_t>(length));
  for (Index i = 0; i < length; ++i) pool[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, length - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> missing(pool.begin(), pool.begin() + count);
  std::sort(missing.begin(), missing.end());
  return make_gap_mask(std::move(missing), length);
}

inline GapMask compact_gaps_mask(Index length, int sample_rate,
                                 const CompactGaps& spec, std::uint64_t seed) {
  if (spec.count < 1)
    throw std::invalid_argument("degrade: gap count must be >= 1");
  if (spec.gap_ms <= 0.0 || spec.min_context_ms < 0.0)
    throw std::invalid_argument("degrade: gap lengths must be positive");
  const Index gap_len = static_cast<Index>(std::llround(
      spec.gap_ms / 1000.0 * static_cast<double>(sample_rate)));
  const Index context = static_cast<Index>(std::llround(
      spec.min_context_ms / 1000.0 * static_cast<double>(sample_rate)));
  if (gap_len < 1)
    throw std::invalid_argument("degrade: gap shorter than one sample");
  if (static_cast<long long>(spec.count) * gap_len +
          static_cast<long long>(spec.count - 1) * context >=
      length)
    throw InfeasibleSpecError("degrade: gaps cannot fit the signal");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, length - gap_len);
  std::vector<std::pair<Index, Index>> placed;  // (start, end)
  int attempts = 0;
  const int budget = 100000;
  while (static_cast<int>(placed.size()) < spec.count) {
    if (++attempts > budget)
      throw InfeasibleSpecError(
          "degrade: could not place the requested gaps (attempt budget exhausted)");
    const Index start = pick(rng);
    const Index end = start + gap_len;
    bool ok = true;
    for (const auto& [s, e] : placed) {
      if (start < e + context && s < end + context) {
        ok = false;
        break;
      }
    }
    if (ok) placed.emplace_back(start, end);
  }
  std::sort(placed.begin(), placed.end());
  std::vector<Index> missing;
  missing.reserve(static_cast<std::size_t>(spec.count) *
                  static_cast<std::size_t>(gap_len));
  for (const auto& [s, e] : placed)
    for (Index i = s; i < e; ++i) missing.push_back(i);
  return make_gap_mask(std::move(missing), length);
}

}  // namespace detail

// Generate (or load) the gap mask for a signal. Placement is a pure
// function of the degradation parameters, the signal length/rate, and the seed.
inline GapMask make_gaps(const Signal& signal, const Degradation& degradation,
                         std::uint64_t seed) {
  validate_signal(signal);
  const Index length = signal.samples.size();
  if (std::holds_alternative<RandomDrop>(degradation))
    return detail::random_drop_mask(
        length, std::get<RandomDrop>(degradation).fraction, seed);
  if (std::holds_alternative<CompactGaps>(degradation))
    return detail::compact_gaps_mask(length, signal.sample_rate,
                                     std::get<CompactGaps>(degradation), seed);
  return load_gap_mask(std::get<MaskFilePath>(degradation).path, length);
}

// Contiguous [start, length) runs of a mask, for reporting.
inline std::vector<std::pair<Index, Index>> mask_runs(const GapMask& mask) {
  std::vector<std::pair<Index, Index>> runs;
  for (std::size_t i = 0; i < mask.missing.size();) {
    std::size_t j = i + 1;
    while (j < mask.missing.size() &&
           mask.missing[j] == mask.missing[j - 1] + 1)
      ++j;
    runs.emplace_back(mask.missing[i],
                      static_cast<Index>(j - i));
    i = j;
  }
  return runs;
}

}  // namespace nmfip
