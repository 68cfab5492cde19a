// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hrvpain {

/// Base of every error raised by the library. The CLI maps the subclasses
/// onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, arguments, or API preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or degenerate input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Too few beats to form the HRV feature set.
class InsufficientBeatsError : public DataError {
 public:
  using DataError::DataError;
};

/// Zero-variance ECG input.
class FlatLineError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values produced during training or inference.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hrvpain
