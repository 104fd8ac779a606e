#pragma once

#include <stdexcept>
#include <string>

namespace mrst {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between tensors/images.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid argument value (negative stride, task out of range, ...).
struct ArgumentError : Error {
  using Error::Error;
};

// Operation not valid in the current state (consumed tape, missing params).
struct StateError : Error {
  using Error::Error;
};

// Dataset-level problems (empty task lists, insufficient corpus).
struct DataError : Error {
  using Error::Error;
};

// Filesystem failures; message carries the path.
struct IoError : Error {
  using Error::Error;
};

// Malformed file contents; message carries the byte offset where known.
struct FormatError : Error {
  using Error::Error;
};

// Run-config schema violations; message lists every offending key.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values where finiteness is required (gradcheck evaluation).
struct EvaluationError : Error {
  using Error::Error;
};

}  // namespace mrst
