#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>

#include "stinla/cholesky.hpp"
#include "stinla/gmrf.hpp"
#include "stinla/sparse.hpp"

namespace stinla::laplace {

// ---------------------------------------------------------------------------
// One-dimensional Laplace approximation.

struct ScalarTarget {
  std::function<double(double)> log_density;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  // Optional analytic derivatives of log_density; finite differences are used
  // when absent.
  std::function<double(double)> first_derivative;
  std::function<double(double)> second_derivative;
};

struct LaplaceFit {
  double mode = 0.0;
  double variance = 0.0;
};

// Normal approximation to the Gamma(shape, rate) density at its mode.
LaplaceFit gamma_laplace(double shape, double rate);

// Newton iteration on the log density. Concave steps are damped by halving
// until the log density does not decrease.
LaplaceFit scalar_laplace(const ScalarTarget& target, double init);

// f(x*) sqrt(2 pi s2) (Phi(beta) - Phi(alpha)) with Phi the Normal(x*, s2) CDF.
double laplace_interval_integral(const ScalarTarget& target, double alpha, double beta,
                                 double init);
double laplace_interval_integral(const ScalarTarget& target, double alpha, double beta);

// ---------------------------------------------------------------------------
// Latent Gaussian models.

enum class Likelihood { PoissonLog, GaussianIdentity };

// Prior x ~ N(prior_mean, prior_precision^{-1}) conditioned on the prior's
// constraints; observation i has linear predictor design.row(i) x + offset[i].
// NaN observations are missing and contribute nothing to the likelihood.
struct LatentGaussianProblem {
  gmrf::PrecisionStructure prior_precision;
  Vector prior_mean;
  SparseRowMatrix design;
  Vector offset;
  Likelihood likelihood = Likelihood::PoissonLog;
  double noise_precision = 1.0;
  Vector observations;

  int dim() const noexcept { return prior_precision.dim(); }
  int num_observations() const noexcept { return static_cast<int>(observations.size()); }
};

// Log density of observation y given linear predictor eta (full constants).
double log_likelihood(Likelihood family, double y, double eta, double noise_precision);

// Gaussian approximation at the conditional mode.
struct GaussianApprox {
  Vector mode;
  std::shared_ptr<const gmrf::CholeskyFactor> precision_factor;
  // Empty unless marginals were requested.
  Vector marginal_sds;
  std::optional<gmrf::SelectedInverse> selected_inverse;
  DenseMatrix kriging;        // precision^{-1} A'
  DenseMatrix gram_inverse;   // (A precision^{-1} A')^{-1}
  int iterations = 0;
  double gradient_norm = 0.0;  // constraint-projected, at the mode
  double initial_gradient_norm = 0.0;
  double objective = 0.0;      // log prior + log likelihood at the mode (unnormalised prior)
  double log_likelihood = 0.0;
  // log det(precision at mode) + log det(A precision^{-1} A').
  double constrained_log_det = 0.0;

  bool has_marginals() const noexcept { return selected_inverse.has_value(); }
  // Posterior covariance of latent entries i and j after conditioning on the
  // constraints. Requires marginals and (i, j) inside the factor pattern.
  double covariance(int i, int j) const;
  // Variance of sum_k weights[k] x[index[k]].
  double linear_combination_variance(std::span<const int> index,
                                     std::span<const double> weights) const;
};

struct ApproxOptions {
  int max_iterations = 100;
  bool compute_marginals = true;
  std::optional<Vector> initial;
  // Symbolic analyses reused when the sparsity pattern matches: the curvature
  // at the mode, and the prior precision (hyperparameter evaluation only).
  std::shared_ptr<const gmrf::SymbolicCholesky> symbolic;
  std::shared_ptr<const gmrf::SymbolicCholesky> prior_symbolic;
};

GaussianApprox gaussian_approximation(const LatentGaussianProblem& problem,
                                      const ApproxOptions& options = {});

// ---------------------------------------------------------------------------
// Hyperparameter posterior and empirical Bayes.

// psi holds log precisions.
using ProblemBuilder = std::function<LatentGaussianProblem(const Vector& psi)>;
using LogHyperprior = std::function<double(const Vector& psi)>;

// Sum over components of the log density of theta = log(tau) when
// tau ~ Gamma(shape, rate).
LogHyperprior gamma_log_precision_prior(double shape = 1.0, double rate = 5e-5);

struct HyperEvaluation {
  double value = 0.0;  // including the hyperprior
  double log_hyperprior = 0.0;
  GaussianApprox approx;
  std::shared_ptr<const gmrf::SymbolicCholesky> prior_symbolic;
};

HyperEvaluation evaluate_hyper_posterior(const ProblemBuilder& builder, const Vector& psi,
                                         const LogHyperprior& hyperprior,
                                         const ApproxOptions& options = {});

double log_hyper_posterior(const ProblemBuilder& builder, const Vector& psi,
                           const LogHyperprior& hyperprior);

struct EbOptions {
  LogHyperprior hyperprior = gamma_log_precision_prior();
  double initial_step = 1.0;
  double tolerance = 1e-4;  // simplex diameter, log scale
  int max_evaluations = 500;
};

struct EbResult {
  Vector psi_mode;
  GaussianApprox fit;
  double log_posterior = 0.0;
  int evaluations = 0;
};

EbResult eb_optimize(const ProblemBuilder& builder, const Vector& init_psi,
                     const EbOptions& options = {});

}  // namespace stinla::laplace
