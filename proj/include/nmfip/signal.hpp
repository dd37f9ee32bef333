#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nmfip/errors.hpp"

namespace nmfip {

using Index = Eigen::Index;

// Mono audio signal. samples are finite doubles, sample_rate in Hz.
struct Signal {
  Eigen::VectorXd samples;
  int sample_rate = 0;
};

inline void validate_signal(const Signal& signal) {
  if (signal.sample_rate <= 0)
    throw std::invalid_argument("signal: sample_rate must be positive");
  if (signal.samples.size() == 0)
    throw std::invalid_argument("signal: empty");
  if (!signal.samples.allFinite())
    throw std::invalid_argument("signal: non-finite sample");
}

// Indices of the missing samples, strictly increasing, all in
// [0, signal_length). The observed complement must be non-empty.
struct GapMask {
  std::vector<Index> missing;
};

inline GapMask make_gap_mask(std::vector<Index> missing, Index signal_length) {
  if (signal_length <= 0)
    throw std::invalid_argument("gap mask: signal_length must be positive");
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (missing[i] < 0 || missing[i] >= signal_length)
      throw std::invalid_argument("gap mask: index out of range");
    if (i > 0 && missing[i] <= missing[i - 1])
      throw std::invalid_argument("gap mask: indices not strictly increasing");
  }
  if (static_cast<Index>(missing.size()) >= signal_length)
    throw std::invalid_argument("gap mask: no observed samples left");
  return GapMask{std::move(missing)};
}

inline std::vector<Index> observed_indices(const GapMask& mask,
                                           Index signal_length) {
  std::vector<Index> observed;
  observed.reserve(static_cast<std::size_t>(signal_length) - mask.missing.size());
  std::size_t k = 0;
  for (Index i = 0; i < signal_length; ++i) {
    if (k < mask.missing.size() && mask.missing[k] == i) {
      ++k;
    } else {
      observed.push_back(i);
    }
  }
  return observed;
}

// Mask file format: one 0-based missing-sample index per line, LF endings,
// sorted ascending. An empty file means nothing is missing.
inline GapMask load_gap_mask(const std::filesystem::path& path,
                             Index signal_length) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mask file: " + path.string());
  std::vector<Index> missing;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    long long value = 0;
    try {
      value = std::stoll(line, &pos);
    } catch (const std::exception&) {
      throw IoError("mask file: bad line '" + line + "'");
    }
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\r')) ++pos;
    if (pos != line.size())
      throw IoError("mask file: bad line '" + line + "'");
    missing.push_back(static_cast<Index>(value));
  }
  try {
    return make_gap_mask(std::move(missing), signal_length);
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("mask file: ") + e.what());
  }
}

inline void save_gap_mask(const std::filesystem::path& path,
                          const GapMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mask file: " + path.string());
  for (Index i : mask.missing) out << i << '\n';
  if (!out) throw IoError("failed writing mask file: " + path.string());
}

}  // namespace nmfip
