#include "stinla/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace stinla::optimize {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& options) {
  const int d = static_cast<int>(x0.size());
  const double inf = std::numeric_limits<double>::infinity();
  // Gao & Han parameters; reduce to the classic (1, 2, 0.5, 0.5) for d = 2.
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / std::max(d, 2);
  const double contract = 0.75 - 0.5 / std::max(d, 2);
  const double shrink = 1.0 - 1.0 / std::max(d, 2);

  NelderMeadResult result;
  auto eval = [&](const Vector& x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : inf;
  };

  std::vector<Vector> simplex(static_cast<std::size_t>(d) + 1, x0);
  std::vector<double> values(static_cast<std::size_t>(d) + 1);
  for (int i = 0; i < d; ++i) simplex[i + 1][i] += options.initial_step;
  for (int i = 0; i <= d; ++i) values[i] = eval(simplex[i]);

  std::vector<int> order(static_cast<std::size_t>(d) + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });
    std::vector<Vector> s(simplex.size());
    std::vector<double> v(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      s[i] = simplex[order[i]];
      v[i] = values[order[i]];
    }
    simplex.swap(s);
    values.swap(v);
  };
  auto diameter = [&] {
    double m = 0.0;
    for (int i = 1; i <= d; ++i) m = std::max(m, (simplex[i] - simplex[0]).norm());
    return m;
  };

  sort_simplex();
  while (true) {
    result.diameter = diameter();
    if (d == 0 || result.diameter <= options.tolerance) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;

    Vector centroid = Vector::Zero(d);
    for (int i = 0; i < d; ++i) centroid += simplex[i];
    centroid /= d;
    const Vector& worst = simplex[d];

    const Vector xr = centroid + reflect * (centroid - worst);
    const double fr = eval(xr);
    if (fr < values[0]) {
      const Vector xe = centroid + expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[d] = xe;
        values[d] = fe;
      } else {
        simplex[d] = xr;
        values[d] = fr;
      }
    } else if (fr < values[d - 1]) {
      simplex[d] = xr;
      values[d] = fr;
    } else {
      const bool outside = fr < values[d];
      const Vector xc = outside ? Vector(centroid + contract * (xr - centroid))
                                : Vector(centroid + contract * (worst - centroid));
      const double fc = eval(xc);
      if (fc < std::min(fr, values[d])) {
        simplex[d] = xc;
        values[d] = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          simplex[i] = simplex[0] + shrink * (simplex[i] - simplex[0]);
          values[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  result.x = simplex[0];
  result.value = values[0];
  return result;
}

}  // namespace stinla::optimize
