#pragma once

#include <stdexcept>
#include <string>

namespace madt {

/// Raised when a computation produces or receives NaN/Inf values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint file has a bad magic, version, checksum or is truncated.
class CorruptCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A separation metric is undefined (e.g. a zero-energy reference).
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset directory does not follow `<root>/<track>/{mixture,vocals,accompaniment}.wav`.
class DatasetLayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or unsupported WAV data.
class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration (unknown key, malformed value, broken invariant).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace madt
