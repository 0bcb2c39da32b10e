#include "stinla/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stinla/error.hpp"
#include "stinla/optimize.hpp"

namespace stinla::laplace {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Central differences refined by one Richardson step; the step is kept
// inside the support.
struct Derivatives {
  double first;
  double second;
};

Derivatives numeric_derivatives(const ScalarTarget& t, double x) {
  double h = 1e-3 * std::max(1.0, std::abs(x));
  if (std::isfinite(t.lo)) h = std::min(h, 0.5 * (x - t.lo));
  if (std::isfinite(t.hi)) h = std::min(h, 0.5 * (t.hi - x));
  const double f0 = t.log_density(x);
  auto central = [&](double step) {
    const double fp = t.log_density(x + step);
    const double fm = t.log_density(x - step);
    return Derivatives{(fp - fm) / (2.0 * step), (fp - 2.0 * f0 + fm) / (step * step)};
  };
  const Derivatives coarse = central(h);
  const Derivatives fine = central(0.5 * h);
  return {(4.0 * fine.first - coarse.first) / 3.0, (4.0 * fine.second - coarse.second) / 3.0};
}

Derivatives derivatives(const ScalarTarget& t, double x) {
  if (t.first_derivative && t.second_derivative) {
    return {t.first_derivative(x), t.second_derivative(x)};
  }
  return numeric_derivatives(t, x);
}

bool inside(const ScalarTarget& t, double x) { return x > t.lo && x < t.hi; }

double log_det_spd(const DenseMatrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<DenseMatrix> llt(m);
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite,
          "constraint covariance is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

LaplaceFit gamma_laplace(double shape, double rate) {
  require(rate > 0.0, ErrorCode::InvalidInput, "Gamma rate must be positive");
  if (!(shape > 1.0)) {
    throw Error(ErrorCode::NoInteriorMode,
                "Gamma(" + std::to_string(shape) + ", " + std::to_string(rate) +
                    ") has no interior mode (shape must exceed 1)");
  }
  return {(shape - 1.0) / rate, (shape - 1.0) / (rate * rate)};
}

LaplaceFit scalar_laplace(const ScalarTarget& target, double init) {
  require(static_cast<bool>(target.log_density), ErrorCode::InvalidInput,
          "scalar target has no log density");
  require(inside(target, init), ErrorCode::InvalidInput, "initial point outside the support");
  double x = init;
  double fx = target.log_density(x);
  for (int iter = 0; iter < 100; ++iter) {
    const Derivatives d = derivatives(target, x);
    double step = -d.first / d.second;
    if (!std::isfinite(step)) {
      throw Error(ErrorCode::NotAMaximum, "zero curvature at x = " + std::to_string(x));
    }
    double xn = x + step;
    double fn = inside(target, xn) ? target.log_density(xn) : -std::numeric_limits<double>::infinity();
    if (d.second < 0.0) {
      for (int halving = 0; halving < 30 && !(fn >= fx); ++halving) {
        step *= 0.5;
        xn = x + step;
        fn = inside(target, xn) ? target.log_density(xn) : -std::numeric_limits<double>::infinity();
      }
    } else {
      for (int halving = 0; halving < 30 && !inside(target, xn); ++halving) {
        step *= 0.5;
        xn = x + step;
      }
      fn = inside(target, xn) ? target.log_density(xn) : -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(fn)) {
      throw Error(ErrorCode::NoConvergence, "Newton step left the support at x = " +
                                                std::to_string(x));
    }
    x = xn;
    fx = fn;
    if (std::abs(step) <= 1e-10 * (1.0 + std::abs(x))) {
      const Derivatives at_mode = derivatives(target, x);
      if (!(at_mode.second < 0.0)) {
        throw Error(ErrorCode::NotAMaximum,
                    "stationary point at x = " + std::to_string(x) +
                        " is not a maximum (second derivative " +
                        std::to_string(at_mode.second) + ")");
      }
      return {x, -1.0 / at_mode.second};
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "scalar Laplace did not converge in 100 iterations (last x = " +
                  std::to_string(x) + ")");
}

double laplace_interval_integral(const ScalarTarget& target, double alpha, double beta,
                                 double init) {
  require(alpha < beta, ErrorCode::InvalidInput, "interval must satisfy alpha < beta");
  const LaplaceFit fit = scalar_laplace(target, init);
  const double sd = std::sqrt(fit.variance);
  const double peak = std::exp(target.log_density(fit.mode));
  return peak * std::sqrt(2.0 * std::numbers::pi * fit.variance) *
         (normal_cdf((beta - fit.mode) / sd) - normal_cdf((alpha - fit.mode) / sd));
}

double laplace_interval_integral(const ScalarTarget& target, double alpha, double beta) {
  double init = 0.0;
  if (std::isfinite(target.lo) && std::isfinite(target.hi)) {
    init = 0.5 * (target.lo + target.hi);
  } else if (std::isfinite(target.lo)) {
    init = target.lo + 1.0;
  } else if (std::isfinite(target.hi)) {
    init = target.hi - 1.0;
  }
  return laplace_interval_integral(target, alpha, beta, init);
}

double log_likelihood(Likelihood family, double y, double eta, double noise_precision) {
  switch (family) {
    case Likelihood::PoissonLog:
      return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    case Likelihood::GaussianIdentity: {
      const double r = y - eta;
      return 0.5 * (std::log(noise_precision) - kLog2Pi) - 0.5 * noise_precision * r * r;
    }
  }
  return 0.0;
}

double GaussianApprox::covariance(int i, int j) const {
  require(selected_inverse.has_value(), ErrorCode::InvalidInput,
          "covariance requested but marginals were not computed");
  double c = (*selected_inverse)(i, j);
  if (kriging.cols() > 0) c -= kriging.row(i).dot(gram_inverse * kriging.row(j).transpose());
  return c;
}

double GaussianApprox::linear_combination_variance(std::span<const int> index,
                                                   std::span<const double> weights) const {
  require(selected_inverse.has_value(), ErrorCode::InvalidInput,
          "variance requested but marginals were not computed");
  require(index.size() == weights.size(), ErrorCode::InvalidInput,
          "index and weight lengths differ");
  double v = 0.0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    v += weights[a] * weights[a] * (*selected_inverse)(index[a], index[a]);
    for (std::size_t b = a + 1; b < index.size(); ++b) {
      v += 2.0 * weights[a] * weights[b] * (*selected_inverse)(index[a], index[b]);
    }
  }
  if (kriging.cols() > 0) {
    Vector u = Vector::Zero(kriging.cols());
    for (std::size_t a = 0; a < index.size(); ++a) u += weights[a] * kriging.row(index[a]).transpose();
    v -= u.dot(gram_inverse * u);
  }
  return v;
}

namespace {

struct Evaluated {
  Vector eta;
  double log_likelihood = 0.0;
  double objective = 0.0;
};

class NewtonObjective {
 public:
  explicit NewtonObjective(const LatentGaussianProblem& p) : p_(p) {}

  Evaluated evaluate(const Vector& x) const {
    Evaluated e;
    e.eta = p_.design * x + p_.offset;
    for (Eigen::Index i = 0; i < e.eta.size(); ++i) {
      const double y = p_.observations[i];
      if (std::isnan(y)) continue;
      e.log_likelihood += log_likelihood(p_.likelihood, y, e.eta[i], p_.noise_precision);
    }
    const Vector r = x - p_.prior_mean;
    e.objective = -0.5 * r.dot(p_.prior_precision.entries * r) + e.log_likelihood;
    if (!std::isfinite(e.objective)) e.objective = -std::numeric_limits<double>::infinity();
    return e;
  }

  // Score and negative curvature of the likelihood in eta.
  void expansion(const Vector& eta, Vector& score, Vector& weight) const {
    score.setZero(eta.size());
    weight.setZero(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double y = p_.observations[i];
      if (std::isnan(y)) continue;
      if (p_.likelihood == Likelihood::PoissonLog) {
        const double mu = std::exp(eta[i]);
        score[i] = y - mu;
        weight[i] = mu;
      } else {
        score[i] = p_.noise_precision * (y - eta[i]);
        weight[i] = p_.noise_precision;
      }
    }
  }

 private:
  const LatentGaussianProblem& p_;
};

void validate(const LatentGaussianProblem& p) {
  const int n = p.dim();
  require(n > 0, ErrorCode::InvalidInput, "latent dimension is zero");
  require(p.prior_mean.size() == n, ErrorCode::InvalidInput, "prior mean length mismatch");
  require(p.design.cols() == n, ErrorCode::InvalidInput, "design column count mismatch");
  require(p.design.rows() == p.observations.size() && p.offset.size() == p.observations.size(),
          ErrorCode::InvalidInput, "observation, offset and design row counts differ");
  require(p.prior_precision.constraints.rows() == 0 || p.prior_precision.constraints.cols() == n,
          ErrorCode::InvalidInput, "constraint width mismatch");
  require(p.likelihood != Likelihood::GaussianIdentity || p.noise_precision > 0.0,
          ErrorCode::InvalidInput, "Gaussian noise precision must be positive");
  bool any = false;
  for (Eigen::Index i = 0; i < p.observations.size(); ++i) {
    const double y = p.observations[i];
    if (std::isnan(y)) continue;
    any = true;
    if (p.likelihood == Likelihood::PoissonLog) {
      require(y >= 0.0 && std::floor(y) == y, ErrorCode::InvalidInput,
              "Poisson observation " + std::to_string(i) + " is not a non-negative integer");
    }
  }
  if (!any) throw Error(ErrorCode::DegenerateProblem, "all observations are missing");
}

}  // namespace

GaussianApprox gaussian_approximation(const LatentGaussianProblem& problem,
                                      const ApproxOptions& options) {
  validate(problem);
  const int n = problem.dim();
  const DenseMatrix& a = problem.prior_precision.constraints;
  const int k = static_cast<int>(a.rows());
  const NewtonObjective objective(problem);

  Eigen::LDLT<DenseMatrix> aat;
  if (k > 0) aat.compute(a * a.transpose());
  auto project = [&](const Vector& v) -> Vector {
    if (k == 0) return v;
    return v - a.transpose() * aat.solve(a * v);
  };

  Vector x = options.initial ? *options.initial : problem.prior_mean;
  require(x.size() == n, ErrorCode::InvalidInput, "initial point length mismatch");
  if (k > 0) x = project(x);
  Evaluated cur = objective.evaluate(x);
  if (!std::isfinite(cur.objective)) {
    x = project(problem.prior_mean);
    cur = objective.evaluate(x);
  }

  const SparseMatrix design_t = problem.design.transpose();
  const SparseMatrix& q = problem.prior_precision.entries;
  std::shared_ptr<const gmrf::SymbolicCholesky> symbolic = options.symbolic;
  auto curvature = [&](const Vector& weight) {
    SparseMatrix h = q + SparseMatrix(design_t * weight.asDiagonal() * problem.design);
    h.makeCompressed();
    return h;
  };

  GaussianApprox out;
  Vector score;
  Vector weight;
  bool converged = false;
  int iter = 0;
  for (;; ++iter) {
    objective.expansion(cur.eta, score, weight);
    const Vector grad = -(q * (x - problem.prior_mean)) + design_t * score;
    const double gnorm = project(grad).norm();
    if (iter == 0) out.initial_gradient_norm = gnorm;
    out.gradient_norm = gnorm;
    if (gnorm <= 1e-8 * (1.0 + out.initial_gradient_norm)) {
      converged = true;
      break;
    }
    if (iter >= options.max_iterations) break;

    const gmrf::CholeskyFactor factor(curvature(weight), 0.0, symbolic);
    symbolic = factor.symbolic();
    Vector delta = factor.solve(grad);
    if (k > 0) {
      const DenseMatrix w = factor.solve(DenseMatrix(a.transpose()));
      delta -= w * (a * w).ldlt().solve(a * (x + delta));
    }

    double step = 1.0;
    Evaluated next = objective.evaluate(x + delta);
    for (int halving = 0; halving < 30 && !(next.objective >= cur.objective); ++halving) {
      step *= 0.5;
      next = objective.evaluate(x + step * delta);
    }
    if (!(next.objective >= cur.objective)) {
      // No ascent possible at working precision.
      converged = true;
      break;
    }
    const double moved = (step * delta).lpNorm<Eigen::Infinity>();
    x += step * delta;
    cur = std::move(next);
    if (moved <= 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      objective.expansion(cur.eta, score, weight);
      out.gradient_norm =
          project(-(q * (x - problem.prior_mean)) + design_t * score).norm();
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence,
                "Newton iteration did not converge in " + std::to_string(options.max_iterations) +
                    " iterations; last gradient norm " + std::to_string(out.gradient_norm));
  }

  objective.expansion(cur.eta, score, weight);
  auto factor = std::make_shared<const gmrf::CholeskyFactor>(curvature(weight), 0.0, symbolic);
  out.mode = x;
  out.iterations = iter;
  out.objective = cur.objective;
  out.log_likelihood = cur.log_likelihood;
  out.constrained_log_det = factor->log_det();
  if (k > 0) {
    out.kriging = factor->solve(DenseMatrix(a.transpose()));
    const DenseMatrix gram = a * out.kriging;
    out.constrained_log_det += log_det_spd(gram);
    out.gram_inverse = gram.ldlt().solve(DenseMatrix::Identity(k, k));
  } else {
    out.kriging = DenseMatrix(n, 0);
    out.gram_inverse = DenseMatrix(0, 0);
  }
  if (options.compute_marginals) {
    out.selected_inverse.emplace(*factor);
    Vector var = out.selected_inverse->diagonal();
    if (k > 0) {
      const DenseMatrix kg = out.kriging * out.gram_inverse;
      var -= (kg.array() * out.kriging.array()).rowwise().sum().matrix();
    }
    out.marginal_sds = var.cwiseMax(0.0).cwiseSqrt();
  }
  out.precision_factor = std::move(factor);
  return out;
}

LogHyperprior gamma_log_precision_prior(double shape, double rate) {
  require(shape > 0.0 && rate > 0.0, ErrorCode::InvalidInput,
          "hyperprior Gamma parameters must be positive");
  const double norm = shape * std::log(rate) - std::lgamma(shape);
  return [=](const Vector& psi) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      s += norm + shape * psi[i] - rate * std::exp(psi[i]);
    }
    return s;
  };
}

HyperEvaluation evaluate_hyper_posterior(const ProblemBuilder& builder, const Vector& psi,
                                         const LogHyperprior& hyperprior,
                                         const ApproxOptions& options) {
  const LatentGaussianProblem problem = builder(psi);
  HyperEvaluation out{0.0, 0.0, gaussian_approximation(problem, options), nullptr};
  const GaussianApprox& g = out.approx;
  const int n = problem.dim();
  const DenseMatrix& a = problem.prior_precision.constraints;
  const int k = static_cast<int>(a.rows());

  const gmrf::CholeskyFactor prior(problem.prior_precision.entries, 0.0, options.prior_symbolic);
  out.prior_symbolic = prior.symbolic();
  const Vector r = g.mode - problem.prior_mean;
  double log_prior = -0.5 * (n - k) * kLog2Pi + 0.5 * prior.log_det() -
                     0.5 * r.dot(problem.prior_precision.entries * r);
  if (k > 0) {
    const DenseMatrix v = a * prior.solve(DenseMatrix(a.transpose()));
    const Vector m = a * problem.prior_mean;
    log_prior += 0.5 * log_det_spd(v) + 0.5 * m.dot(v.ldlt().solve(m));
  }
  const double log_approx = -0.5 * (n - k) * kLog2Pi + 0.5 * g.constrained_log_det;
  out.log_hyperprior = hyperprior ? hyperprior(psi) : 0.0;
  out.value = g.log_likelihood + log_prior - log_approx + out.log_hyperprior;
  return out;
}

double log_hyper_posterior(const ProblemBuilder& builder, const Vector& psi,
                           const LogHyperprior& hyperprior) {
  ApproxOptions options;
  options.compute_marginals = false;
  return evaluate_hyper_posterior(builder, psi, hyperprior, options).value;
}

EbResult eb_optimize(const ProblemBuilder& builder, const Vector& init_psi,
                     const EbOptions& options) {
  ApproxOptions approx;
  approx.compute_marginals = false;
  double best_value = -std::numeric_limits<double>::infinity();
  Vector best_psi = init_psi;

  auto negative = [&](const Vector& psi) -> double {
    try {
      HyperEvaluation ev = evaluate_hyper_posterior(builder, psi, options.hyperprior, approx);
      approx.symbolic = ev.approx.precision_factor->symbolic();
      approx.prior_symbolic = ev.prior_symbolic;
      if (ev.value > best_value) {
        best_value = ev.value;
        best_psi = psi;
        approx.initial = ev.approx.mode;
      }
      return -ev.value;
    } catch (const Error& e) {
      if (!is_numerical(e.code())) throw;
      return std::numeric_limits<double>::infinity();
    }
  };

  optimize::NelderMeadOptions nm;
  nm.initial_step = options.initial_step;
  nm.tolerance = options.tolerance;
  nm.max_evaluations = options.max_evaluations;
  const optimize::NelderMeadResult found = optimize::nelder_mead(negative, init_psi, nm);
  if (!found.converged) {
    throw NoConvergence("empirical Bayes search exhausted " +
                            std::to_string(options.max_evaluations) +
                            " evaluations (simplex diameter " + std::to_string(found.diameter) +
                            ")",
                        std::vector<double>(best_psi.begin(), best_psi.end()), best_value);
  }
  if (!std::isfinite(found.value)) {
    throw NoConvergence("no hyperparameter value gave a finite posterior",
                        std::vector<double>(init_psi.begin(), init_psi.end()), best_value);
  }

  approx.compute_marginals = true;
  HyperEvaluation final_eval = evaluate_hyper_posterior(builder, found.x, options.hyperprior, approx);
  return EbResult{found.x, std::move(final_eval.approx), final_eval.value, found.evaluations + 1};
}

}  // namespace stinla::laplace
