#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace geofill {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Input is well formed but the estimation problem is degenerate.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Error raised while running a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace geofill
