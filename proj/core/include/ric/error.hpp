#pragma once

#include <stdexcept>
#include <string>

namespace ric {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates a documented precondition
/// (odd grid height, unsupported input size, bad hyperparameter).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A geometric query has no defined answer (e.g. radial direction at the
/// image center).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A layer or network was driven out of order (backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// File-level failures while reading or writing datasets and checkpoints.
class IoError : public Error {
 public:
  enum class Kind { kMissingFile, kBadMagic, kTruncated, kMalformed, kWriteFailed };

  IoError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ric
