#pragma once

#include <stdexcept>
#include <string>

namespace colloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, indefinite covariances, singular systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range configuration / input files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace colloc
