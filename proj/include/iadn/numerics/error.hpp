#pragma once

#include <stdexcept>
#include <string>

namespace iadn {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or grid geometries.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf reached an operation boundary.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The caller broke an API contract (wrong tape, missing key, non-scalar...).
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or degenerate input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace iadn
