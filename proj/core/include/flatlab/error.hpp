#pragma once

#include <stdexcept>
#include <string>

namespace flatlab {

enum class ErrorKind {
  NotPositiveDefinite,
  ShapeMismatch,
  OutOfDomain,
  GaugeViolation,
  DimensionTooSmall,
  DimensionMismatch,
  LineSearchFailed,
  Unsupported,
  ConfigInvalid,
  NumericalFailure,
  IoFailure,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every recoverable failure in the library is reported through this type;
/// the kind is what callers (and the CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace flatlab
