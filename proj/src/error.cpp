#include "stinla/error.hpp"

namespace stinla {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Io: return "io";
    case ErrorCode::DuplicateRow: return "duplicate-row";
    case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::DegenerateProblem: return "degenerate-problem";
    case ErrorCode::UnsupportedSize: return "unsupported-size";
    case ErrorCode::EmptyMetric: return "empty-metric";
    case ErrorCode::NoInteriorMode: return "no-interior-mode";
    case ErrorCode::NotAMaximum: return "not-a-maximum";
  }
  return "unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateProblem:
    case ErrorCode::NoInteriorMode:
    case ErrorCode::NotAMaximum:
      return true;
    default:
      return false;
  }
}

}  // namespace stinla
