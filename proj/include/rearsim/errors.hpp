#pragma once

#include <stdexcept>
#include <string>

namespace rearsim {

/// Exit codes used by the command-line tool. Every library error maps onto one.
enum class ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kValidation = 2,
  kModelUndefined = 3,
  kFitFailure = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, std::string kind, const std::string& what)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}

  ExitCode code() const { return code_; }
  const std::string& kind() const { return kind_; }

 private:
  ExitCode code_;
  std::string kind_;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ExitCode::kValidation, "parse", what) {}
};

/// Input parsed but violates a documented invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::kValidation, "validation", what) {}
};

/// Argument outside the mathematical domain of an operation (e.g. overlapping vehicles).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ExitCode::kValidation, "domain", what) {}
};

/// The brake-light model is not defined for non-braking or standstill leads.
class ModelUndefinedError : public Error {
 public:
  explicit ModelUndefinedError(const std::string& what)
      : Error(ExitCode::kModelUndefined, "model-undefined", what) {}
};

/// Seed synthesis could not produce a collision under the configured ranges.
class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what)
      : Error(ExitCode::kValidation, "generation", what) {}
};

/// A fit did not converge or its input cannot be fitted.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error(ExitCode::kFitFailure, "fit", what) {}
};

}  // namespace rearsim
