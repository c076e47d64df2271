#pragma once

#include <stdexcept>
#include <string>

namespace cfstack {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (CSV cells, numbers).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input text is well formed but lacks required columns or fields.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Components that must agree on a shared interface (label count, output width) do not.
class InterfaceError : public Error {
 public:
  using Error::Error;
};

/// A quantity is mathematically undefined for the given input (e.g. cosine of a zero vector).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Rejected run configuration. Raised before any computation starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure inside one pipeline stage, keeping the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace cfstack
