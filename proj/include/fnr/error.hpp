#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fnr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two masks (or a mask and a depth map) live on different grids.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation that needs at least one foreground pixel got none.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or text. The message carries file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or preconditions on inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model fit failed (no events, single class, non-convergence).
class FitError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; wraps the underlying message with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace fnr
