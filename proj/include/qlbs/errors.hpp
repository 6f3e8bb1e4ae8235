#pragma once

#include <stdexcept>
#include <string>

namespace qlbs {

/// Invalid model or solver parameters (nonpositive volatility, step size, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate interval (empty basis domain).
class RangeError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Too few observations for a cross-sectional statistic.
class DatasetTooSmallError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or incomplete input data (files, datasets, baskets).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failure or a numerically invalid result.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step = -1)
      : std::runtime_error(step >= 0 ? what + " (time step " + std::to_string(step) + ")" : what),
        step_(step) {}

  /// Time step the failure is attributed to, or -1.
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace qlbs
