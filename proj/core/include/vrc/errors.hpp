#pragma once

#include <stdexcept>
#include <string>

namespace vrc {

// Base of every error the library raises. The CLI maps each subclass to a
// distinct nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data violates a type invariant (dimension mismatch, bad box, bad index).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be parsed or is structurally malformed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// File declares a schema version this build does not understand.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Unusable configuration (no eligible predicate, bad flag combination).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An image with fewer than two regions has no ordered pairs.
class DegenerateImageError : public Error {
 public:
  using Error::Error;
};

// Test-split supervision reached a training path.
class LeakError : public Error {
 public:
  using Error::Error;
};

// Loss or gradient became NaN/inf during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Exhaustive search refused because the labeling space exceeds the cap.
class CapExceededError : public Error {
 public:
  using Error::Error;
};

// Metric has an empty denominator or missing ground truth.
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrc
