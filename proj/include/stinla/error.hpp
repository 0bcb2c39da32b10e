#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stinla {

// Numeric values are mirrored by stinla_status in stinla.h.
enum class ErrorCode : int {
  InvalidInput = 1,
  InvalidSpec = 2,
  Parse = 3,
  Io = 4,
  DuplicateRow = 5,
  NotPositiveDefinite = 6,
  NoConvergence = 7,
  DegenerateProblem = 8,
  UnsupportedSize = 9,
  EmptyMetric = 10,
  NoInteriorMode = 11,
  NotAMaximum = 12,
};

const char* error_code_name(ErrorCode code) noexcept;

// True for failures that originate in the numerical machinery rather than in
// the inputs.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, long line)
      : Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(long pivot, double value)
      : Error(ErrorCode::NotPositiveDefinite,
              "matrix is not positive definite: pivot " + std::to_string(pivot) +
                  " has value " + std::to_string(value)),
        pivot_(pivot) {}

  // Index of the failing pivot, in the caller's (unpermuted) numbering.
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& message, std::vector<double> best_point, double best_value)
      : Error(ErrorCode::NoConvergence, message),
        best_point_(std::move(best_point)),
        best_value_(best_value) {}

  const std::vector<double>& best_point() const noexcept { return best_point_; }
  double best_value() const noexcept { return best_value_; }

 private:
  std::vector<double> best_point_;
  double best_value_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) fail(code, message);
}

}  // namespace stinla
