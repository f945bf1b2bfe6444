#pragma once

#include <stdexcept>
#include <string>

namespace dage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (IDX, checkpoint, manifest).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent user-supplied configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine failed (no convergence, not positive definite).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dage
