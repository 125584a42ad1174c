#pragma once

#include <stdexcept>
#include <string>

namespace dnls {

/// Inputs that do not fit together (mismatched grids, wrong component counts,
/// non-finite coefficients).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument outside the mathematical domain of an operation (s < 0, R >= L, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A metric that is not uniformly positive definite.
class InvalidMetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration that fails to parse or validate. Carries the offending line
/// (0 when the problem is not tied to a line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Numerical instability: norm explosion, non-finite state. The defocusing
/// equation does not blow up, so these are always discretisation failures.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dnls
