#pragma once

#include <stdexcept>
#include <string>

namespace hyload {

enum class ErrorKind {
  DisconnectedGraph,
  InvalidParameter,
  DimensionMismatch,
  UnbalancedInjections,
  TooManyLoads,
  NonfiniteState,
  MaxJumpsExceeded,
  DesignConditionViolated,
  ParseError,
  ValidationError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DisconnectedGraph: return "disconnected-graph";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::UnbalancedInjections: return "unbalanced-injections";
    case ErrorKind::TooManyLoads: return "too-many-loads";
    case ErrorKind::NonfiniteState: return "nonfinite-state";
    case ErrorKind::MaxJumpsExceeded: return "max-jumps-exceeded";
    case ErrorKind::DesignConditionViolated: return "design-condition-violated";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::ValidationError: return "validation-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hyload
