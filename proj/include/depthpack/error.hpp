#pragma once

#include <stdexcept>
#include <string>

namespace depthpack {

// Root of every error thrown by the library. The CLI maps the subclasses to
// exit codes (config/version -> 2, data/dimension -> 3, anything else -> 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid packing or channel parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Plane or map sizes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid input data: malformed headers, truncated payloads,
// non-finite samples, out-of-range values.
class DataError : public Error {
 public:
  using Error::Error;
};

class TrajectoryError : public DataError {
 public:
  using DataError::DataError;
};

// A file written by a different, incompatible version of the tool.
class VersionError : public Error {
 public:
  using Error::Error;
};

// External encoder process could not be started or exited abnormally.
class SpawnError : public Error {
 public:
  using Error::Error;
};

}  // namespace depthpack
