#pragma once

#include <stdexcept>
#include <string>

namespace dqrc {

/// Base of every error thrown by the library. Subclasses map onto the CLI
/// exit-code contract (data = 2, config = 3, service = 4).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Qubit index out of range, control == target, width mismatch.
class StructuralError : public Error {
  public:
    using Error::Error;
};

/// Non-finite angles, zero shots, bad shapes.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// Problem too large for the dense representation.
class CapacityError : public Error {
  public:
    using Error::Error;
};

/// Factorization failure and similar numerical breakdowns.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Input files, series and splits.
class DataError : public Error {
  public:
    using Error::Error;
};

/// Architecture/experiment configuration rule violations.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Transport and remote-worker failures.
class ServiceError : public Error {
  public:
    using Error::Error;
};

}  // namespace dqrc
