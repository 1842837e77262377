#pragma once

#include <stdexcept>
#include <string>

namespace fmc {

/// Dimension, channel count or grid shape disagreement.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed byte stream (bad magic, truncated payload, bad header).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Value outside the representable range of a codec.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Named entity (tensor, key) not present.
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A normalisation hit a zero vector (degenerate mean, mode or embedding).
struct DegenerateError : std::domain_error {
  using std::domain_error::domain_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inputs that are individually well formed but inconsistent with each other.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace fmc
