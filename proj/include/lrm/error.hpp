#pragma once

#include <stdexcept>
#include <string>

namespace lrm {

/// Base class for recoverable errors raised while processing inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (corpus, vectors, qrels, runs).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Corrupt, truncated or mismatched binary files.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid job configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrm
