#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deltaope {

// Fewer samples than an estimator needs (sample variance requires n >= 2).
class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A logged sample with a nonpositive logging propensity.
class SupportViolationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Importance weights summing to zero, so self-normalisation is undefined.
class DegenerateWeightsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The optimal-baseline ratio has a zero denominator.
class DegenerateBaselineError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalFailureError : public std::runtime_error {
 public:
  NumericalFailureError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace deltaope
