#pragma once

#include <stdexcept>
#include <string>

namespace nmfip {

// Linear solve or factorization broke down (ill-conditioned or indefinite
// observed-sample covariance). frame/iteration are -1 when unknown at the
// throw site; outer loops re-throw with both filled in.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, long frame = -1,
                          int iteration = -1)
      : std::runtime_error(what), frame_(frame), iteration_(iteration) {}

  long frame() const noexcept { return frame_; }
  int iteration() const noexcept { return iteration_; }

 private:
  long frame_;
  int iteration_;
};

// Overlap-add was handed frames whose imaginary residual exceeds the
// tolerance, i.e. Hermitian symmetry was broken upstream.
class SymmetryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given inputs (e.g. zero reference energy).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A degradation spec cannot be satisfied (gaps do not fit the signal).
class InfeasibleSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read, parsed, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmfip
