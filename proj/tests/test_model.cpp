#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "stinla/error.hpp"
#include "stinla/evaluate.hpp"
#include "stinla/model.hpp"
#include "stinla/sim.hpp"

using namespace stinla;
using namespace stinla::model;

namespace {

gmrf::SiteGraph chain(int n) {
  std::vector<gmrf::SiteGraph::Edge> e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  return gmrf::SiteGraph(n, e);
}

ingest::CountFrame full_frame(int sites, int days, int period, double value) {
  ingest::CountFrame f;
  const Date start = parse_date("2018-01-15");
  for (int d = 0; d < days; ++d) {
    for (int b = 0; b < period; ++b) {
      for (int s = 1; s <= sites; ++s) f.rows.push_back({add_days(start, d), b, s, value + s + b, {}});
    }
  }
  return f;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("latent layout of the full model") {
  const int n = 93;
  const int days = 2;
  ModelSpec spec;
  const AssembledModel am = assemble(spec, full_frame(n, days, 12, 10.0), chain(n));
  const int t = 12 * days;
  CHECK(am.layout.dim == 1 + 2 * n + t + t + n * t);
  const std::vector<std::string> names{"intercept", "spatial_structured", "spatial_iid",
                                       "temporal_seasonal", "temporal_iid", "interaction"};
  REQUIRE(am.layout.blocks.size() == names.size());
  for (std::size_t i = 0; i < names.size(); ++i) CHECK(am.layout.blocks[i].name == names[i]);
  CHECK(am.layout.find("interaction")->length == n * t);
  CHECK(am.layout.find("nothing") == nullptr);
  CHECK(am.hyper_names.size() == 5);

  const auto p = am.builder(am.init_psi);
  CHECK(p.dim() == am.layout.dim);
  CHECK(p.num_observations() == am.grid.num_cells());
  CHECK(p.prior_precision.num_constraints() == 1 + 11);
  // Each cell loads on intercept, two spatial, two temporal and one interaction entry.
  CHECK(p.design.nonZeros() == 6L * am.grid.num_cells());
}

TEST_CASE("model spec validation and config") {
  ModelSpec s;
  s.spatial = false;
  CHECK_THROWS_AS(s.validate(), Error);
  s.interaction = Interaction::None;
  CHECK_NOTHROW(s.validate());
  s.period = 1;
  CHECK_THROWS_AS(s.validate(), Error);

  std::istringstream in("family = gaussian\nperiod = 6\ninteraction = none\nhyperprior_b = 0.001\n");
  const ModelSpec c = ModelSpec::from_config(Config::read(in));
  CHECK(c.family == Family::Gaussian);
  CHECK(c.period == 6);
  CHECK(c.interaction == Interaction::None);
  CHECK(c.hyperprior_rate == 0.001);
  std::istringstream bad("family = binomial\n");
  try {
    ModelSpec::from_config(Config::read(bad));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSpec);
  }
}

TEST_CASE("assembly rejects inconsistent data") {
  ModelSpec spec;
  spec.period = 4;
  ingest::CountFrame f = full_frame(3, 1, 4, 5.0);
  CHECK_THROWS_AS(assemble(spec, f, chain(2)), Error);  // site 3 unknown
  f.rows.push_back({parse_date("2018-01-15"), 4, 1, 3.0, {}});
  CHECK_THROWS_AS(assemble(spec, f, chain(3)), Error);  // bin beyond the season
  spec.fixed_effects = {"school"};
  CHECK_THROWS_AS(assemble(spec, full_frame(3, 1, 4, 5.0), chain(3)), Error);
}

TEST_CASE("fixed-effect covariates enter the design") {
  ModelSpec spec;
  spec.period = 3;
  spec.fixed_effects = {"x"};
  ingest::CountFrame f = full_frame(2, 2, 3, 5.0);
  f.covariate_names = {"x"};
  for (auto& r : f.rows) r.covariates = {0.25 * r.id};
  const AssembledModel am = assemble(spec, f, chain(2));
  const Block* b = am.layout.find("fixed_effects");
  REQUIRE(b != nullptr);
  const auto p = am.builder(am.init_psi);
  const int cell = am.grid.cell(2, 1, 2);
  CHECK(p.design.coeff(cell, b->offset) == 0.5);
}

TEST_CASE("fitted model honours the sum-to-zero constraints") {
  sim::SimConfig cfg;
  cfg.n_sites = 6;
  cfg.n_days = 3;
  cfg.period = 4;
  cfg.seed = 4;
  const auto g = sim::sample_graph(cfg.n_sites, cfg.seed);
  const auto s = sim::sample_counts(cfg, g);
  ModelSpec spec;
  spec.period = 4;
  const FitResult r = fit(spec, s.frame, g);
  const Block* icar = r.layout.find("spatial_structured");
  CHECK(std::abs(r.latent_mean.segment(icar->offset, icar->length).sum()) <= 1e-6);
  const Block* seas = r.layout.find("temporal_seasonal");
  for (int phase = 0; phase < spec.period - 1; ++phase) {
    double sum = 0.0;
    for (int t = phase; t < seas->length; t += spec.period) sum += r.latent_mean[seas->offset + t];
    CHECK(std::abs(sum) <= 1e-6);
  }
  for (Eigen::Index i = 0; i < r.fitted.size(); ++i) {
    CHECK(r.fitted[i] > 0.0);
    CHECK(r.fitted_sd[i] > 0.0);
  }

  std::stringstream buf;
  write_fit_csv(r, buf);
  const FitResult back = read_fit_csv(buf);
  CHECK(back.grid.days == r.grid.days);
  CHECK(back.grid.num_sites == r.grid.num_sites);
  CHECK(back.grid.period == r.grid.period);
  CHECK((back.fitted - r.fitted).cwiseAbs().maxCoeff() <= 1e-9 * r.fitted.maxCoeff());

  const std::vector<ObservationKey> ok{{2, 1, 3}};
  CHECK(predict(r, ok)[0] == r.fitted[r.grid.cell(2, 1, 3)]);
  const std::vector<ObservationKey> outside{{7, 0, 0}};
  CHECK_THROWS_AS(predict(r, outside), Error);

  std::ostringstream hyper;
  write_hyper_csv(r, hyper);
  CHECK(hyper.str().rfind("Name,LogPrecision,Precision\nspatial_structured,", 0) == 0);
}

TEST_CASE("Gaussian family fit includes the noise precision") {
  sim::SimConfig cfg;
  cfg.n_sites = 4;
  cfg.n_days = 2;
  cfg.period = 3;
  const auto g = sim::sample_graph(cfg.n_sites, 2);
  const auto s = sim::sample_counts(cfg, g);
  ModelSpec spec;
  spec.period = 3;
  spec.family = Family::Gaussian;
  spec.interaction = Interaction::None;
  const FitResult r = fit(spec, s.frame, g);
  CHECK(r.hyper_names.back() == "noise");
  CHECK(r.psi_mode.size() == 5);
  CHECK(std::isfinite(r.log_evidence));
}

TEST_CASE("Gaussian family reproduces the exact least-squares fit") {
  ingest::CountFrame f;
  f.covariate_names = {"x"};
  const Date start = parse_date("2018-01-15");
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int d = 0; d < 3; ++d) {
    for (int b = 0; b < 4; ++b) {
      for (int s = 1; s <= 3; ++s) {
        const double x = 0.3 * s + 0.1 * b - d;
        f.rows.push_back({add_days(start, d), b, s, 20.0 + 1.5 * x + noise(rng), {x}});
      }
    }
  }
  f.rows[5].sum.reset();
  ModelSpec spec;
  spec.period = 4;
  spec.family = Family::Gaussian;
  spec.spatial = false;
  spec.temporal_structured = false;
  spec.temporal_iid = false;
  spec.interaction = Interaction::None;
  spec.fixed_effects = {"x"};
  const FitResult r = fit(spec, f, chain(3));
  REQUIRE(r.hyper_names == std::vector<std::string>{"noise"});

  // Dense normal equations at the fitted noise precision.
  const double kappa = std::exp(r.psi_mode[0]);
  DenseMatrix x = DenseMatrix::Zero(static_cast<Eigen::Index>(f.rows.size()), 2);
  Vector y = Vector::Zero(x.rows());
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    if (!f.rows[i].sum) continue;
    x(i, 0) = 1.0;
    x(i, 1) = f.rows[i].covariates[0];
    y[i] = *f.rows[i].sum;
  }
  const DenseMatrix h = spec.fixed_effect_precision * DenseMatrix::Identity(2, 2) + kappa * x.transpose() * x;
  const Vector beta = h.ldlt().solve(kappa * x.transpose() * y);
  for (const auto& row : f.rows) {
    const int c = r.grid.cell(row.id, r.grid.day_index(row.date), row.time_bin);
    CHECK(std::abs(r.fitted[c] - (beta[0] + beta[1] * row.covariates[0])) <= 1e-6);
  }
}

TEST_CASE("a single observed cell is reproduced") {
  ingest::CountFrame f = full_frame(2, 1, 2, 0.0);
  for (auto& row : f.rows) row.sum.reset();
  f.rows[1].sum = 100.0;
  ModelSpec spec;
  spec.period = 2;
  const FitResult r = fit(spec, f, chain(2));
  const int c = r.grid.cell(f.rows[1].id, 0, f.rows[1].time_bin);
  CHECK(std::abs(r.fitted[c] - 100.0) <= 1.0);
}

TEST_CASE("synthetic data: masked cells track the truth") {
  sim::SimConfig cfg;
  cfg.n_sites = 10;
  cfg.n_days = 14;
  cfg.mask_rate = 0.2;
  cfg.seed = 1;
  const auto g = sim::sample_graph(cfg.n_sites, cfg.seed);
  const auto s = sim::sample_counts(cfg, g);
  const FitResult r = fit(ModelSpec{}, s.frame, g);
  std::vector<double> fitted;
  std::vector<double> truth;
  std::vector<double> counts;
  double observed_sum = 0.0;
  int observed_count = 0;
  for (const auto& row : s.frame.rows) {
    const int c = s.grid.cell(row.id, s.grid.day_index(row.date), row.time_bin);
    if (row.sum) {
      observed_sum += *row.sum;
      ++observed_count;
      continue;
    }
    fitted.push_back(r.fitted[c]);
    truth.push_back(std::exp(s.eta[c]));
    counts.push_back(s.counts[c]);
  }
  REQUIRE(fitted.size() > 100);
  CHECK(correlation(fitted, truth) >= 0.9);
  const std::vector<double> naive(counts.size(), observed_sum / observed_count);
  CHECK(evaluate::mpe(counts, fitted) < evaluate::mpe(counts, naive));
}

TEST_CASE("holdout fits keep the hidden values for scoring") {
  sim::SimConfig cfg;
  cfg.n_sites = 5;
  cfg.n_days = 4;
  cfg.period = 4;
  const auto g = sim::sample_graph(cfg.n_sites, 2);
  const auto s = sim::sample_counts(cfg, g);
  ModelSpec spec;
  spec.period = 4;
  const FitResult r = fit_holdout(spec, s.frame, g, s.grid.days[3], s.grid.days[3]);
  for (int c = 0; c < r.grid.num_cells(); ++c) {
    const bool hidden = c >= r.grid.cell(1, 3, 0);
    CHECK(static_cast<bool>(r.masked[c]) == hidden);
    CHECK(r.reference[c] == s.counts[c]);
    CHECK(std::isnan(r.observed[c]) == hidden);
  }
  CHECK(evaluate::masked_cells(r).size() == 20u);
  CHECK_THROWS_AS(fit_holdout(spec, s.frame, g, parse_date("2020-01-01"), parse_date("2020-01-02")), Error);
}
