#pragma once

#include <stdexcept>
#include <string>

namespace sdnroute {

/// Base of every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text (topology file, checkpoint, scenario, CSV).
struct ParseError : Error {
  using Error::Error;
};

/// Well-formed input that violates a model invariant.
struct ValidationError : Error {
  using Error::Error;
};

/// Shape or length mismatch between tensors, vectors, or architectures.
struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

/// A controller whose offered load reaches its service rate.
struct SaturationError : Error {
  using Error::Error;
};

/// Training produced a non-finite loss or parameter.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace sdnroute
