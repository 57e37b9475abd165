#pragma once

#include <stdexcept>
#include <string>

namespace fssc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (model geometry, channel family, CLI config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Optimizer or training loop in an unusable state (missing gradient, NaN loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Client parameter collections that cannot be averaged together.
class AggregationError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (CIFAR batches, parameter blobs, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated codec bitstream.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable file.
class FileError : public Error {
 public:
  using Error::Error;
};

}  // namespace fssc
