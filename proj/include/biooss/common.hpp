// Shared error taxonomy and small numeric helpers used across the library.
// Every failure mode raised by public API functions is one of the exception
// types below so callers (and the CLI exit-code mapping) can dispatch on type.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace biooss {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Mismatched field or matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where finite values are required. Carries the time
// step index when raised inside a stepping loop (-1 when not applicable).
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step = -1)
      : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// A memory/size guard was exceeded (e.g. dense operator assembly).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// An analytical formula was applied outside its domain of validity.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Eigenvector formulas divide by (lambda_j - lambda_1); near-equal
// eigenvalues must be handled by the dense degenerate branch instead.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// A requested frequency band cannot be reached under the stability bound.
// Carries the maximal achievable frequency for diagnostics.
class InfeasibleBandError : public Error {
 public:
  InfeasibleBandError(const std::string& what, double max_achievable_f)
      : Error(what), max_achievable_f_(max_achievable_f) {}
  double max_achievable_f() const { return max_achievable_f_; }

 private:
  double max_achievable_f_;
};

// Config file / schema violations (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset layout or content violations (CLI exit code 5).
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Stability check failed under --strict (CLI exit code 3).
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Training loss exceeded the divergence guard; carries the loss trace so the
// caller can inspect the blow-up.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

inline bool is_finite(double x) { return std::isfinite(x); }

// Throws NumericError when any entry of v is NaN/Inf.
inline void require_finite(const std::vector<double>& v, const char* label,
                           long step = -1) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value in ") + label, step);
    }
  }
}

}  // namespace biooss
