#pragma once

#include <stdexcept>
#include <string>

namespace polopt {

// Exit codes shared by every CLI command.
enum class ExitCode : int {
  ok = 0,
  validation = 1,
  io = 2,
  evaluator = 3,
  config = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ExitCode::config, what) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what)
      : Error(ExitCode::evaluator, what) {}
};

class TransportError : public EvaluationError {
 public:
  explicit TransportError(const std::string& what) : EvaluationError(what) {}
};

// Raised when a chromosome or id list selects nothing.
class EmptySelectionError : public ValidationError {
 public:
  EmptySelectionError() : ValidationError("empty selection: at least one SAP must be selected") {}
};

// A run was cancelled through its stop token.
class CancelledError : public Error {
 public:
  CancelledError() : Error(ExitCode::evaluator, "run cancelled") {}
};

}  // namespace polopt
