#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swefixer {

enum class ErrorKind {
  Io,
  Structural,
  Lookup,
  Validation,
  InvalidOutput,
  BudgetExhausted,
  Locate,
  Conflict,
  Apply,
  Parse,
  Config,
  Backend,
  Runner,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Lookup: return "lookup";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::InvalidOutput: return "invalid-output";
    case ErrorKind::BudgetExhausted: return "budget-exhausted";
    case ErrorKind::Locate: return "locate";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Apply: return "apply";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::Backend: return "backend";
    case ErrorKind::Runner: return "runner";
  }
  return "unknown";
}

/// Every recoverable failure in the library is an Error carrying its kind,
/// so callers can branch on the category without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace swefixer
