#pragma once

#include <stdexcept>
#include <string>

namespace smartcpd {

/// A value left the domain of a loss, generator or update rule.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A closed-form mirror step would leave the generator's domain; the caller
/// may retry with a larger scaling.
class DomainExit : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Raised when a configuration combines incompatible pieces, e.g. a loss
/// over all-real m with an entropy mirror.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative sub-solver stopped at its cap without meeting tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smartcpd
