#pragma once

#include <stdexcept>
#include <string>

namespace proxyseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or batch geometry that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced by a forward pass or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the differentiation tape (e.g. a second backward pass).
class TapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable on-disk data. `kind()` distinguishes the cause.
class FormatError : public Error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, bad_label, shape_mismatch };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace proxyseg
