#pragma once

#include <functional>

#include "stinla/sparse.hpp"

namespace stinla::optimize {

struct NelderMeadOptions {
  double initial_step = 1.0;
  double tolerance = 1e-4;  // largest vertex distance from the best vertex
  int max_evaluations = 500;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  double diameter = 0.0;
};

// Minimises f with the adaptive-parameter Nelder-Mead simplex. Non-finite
// values are treated as +infinity. Does not throw on exhaustion; callers
// inspect `converged`.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& options = {});

}  // namespace stinla::optimize
