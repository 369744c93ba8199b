#include "flatlab/error.hpp"

namespace flatlab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::GaugeViolation: return "GaugeViolation";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LineSearchFailed: return "LineSearchFailed";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace flatlab
