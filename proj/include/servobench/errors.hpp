#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace servobench {

/// Invalid numeric argument: non-finite input, negative coefficient, J <= 0...
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent configuration (bench, actuator, parameter space).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent data files (logs, params, manifests).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure that is not attributable to the input data.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

}  // namespace detail
}  // namespace servobench
