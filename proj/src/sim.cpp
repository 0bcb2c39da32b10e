#include "stinla/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "stinla/cholesky.hpp"
#include "stinla/error.hpp"

namespace stinla::sim {

namespace {

constexpr double kMaxCount = 1e6;
// Relative diagonal shift that makes intrinsic structures factorable.
constexpr double kSampleJitter = 1e-6;

Vector sample_with(const gmrf::PrecisionStructure& s, double tau, std::mt19937_64& rng) {
  const int n = s.dim();
  if (std::isinf(tau)) return Vector::Zero(n);
  const SparseMatrix q = tau * (s.entries + sparse_identity(n, kSampleJitter));
  const gmrf::CholeskyFactor f(q, 0.0);
  std::normal_distribution<double> normal;
  Vector z(n);
  for (int i = 0; i < n; ++i) z[i] = normal(rng);
  Vector x = f.correlate(z);
  if (s.num_constraints() > 0) {
    const DenseMatrix& a = s.constraints;
    const DenseMatrix w = f.solve(DenseMatrix(a.transpose()));
    const Eigen::LDLT<DenseMatrix> gram(a * w);
    // A second pass removes the rounding left by the first.
    for (int pass = 0; pass < 2; ++pass) x -= w * gram.solve(a * x);
  }
  return x;
}

}  // namespace

void SimConfig::validate() const {
  require(n_sites >= 2, ErrorCode::InvalidInput, "need at least 2 sites");
  require(n_days >= 1, ErrorCode::InvalidInput, "need at least 1 day");
  require(period >= 2, ErrorCode::InvalidInput, "season length must be at least 2");
  for (double tau : {tau_spatial_structured, tau_spatial_iid, tau_seasonal, tau_time_iid, tau_interaction}) {
    require(tau > 0.0, ErrorCode::InvalidInput, "precisions must be positive");
  }
  require(mask_rate >= 0.0 && mask_rate <= 1.0, ErrorCode::InvalidInput, "mask rate must lie in [0, 1]");
  require(zigzag_factor >= 0.0 && zigzag_factor <= 1.0, ErrorCode::InvalidInput,
          "zig-zag factor must lie in [0, 1]");
  require(zigzag_site >= 0 && zigzag_site <= n_sites, ErrorCode::InvalidInput, "zig-zag site out of range");
  if (stuck_low) {
    require(stuck_low->site >= 1 && stuck_low->site <= n_sites && stuck_low->day >= 0 &&
                stuck_low->day < n_days && stuck_low->bin >= 0 && stuck_low->bin < period,
            ErrorCode::InvalidInput, "stuck-low fault outside the simulated grid");
    require(stuck_low->factor >= 0.0 && stuck_low->factor <= 1.0, ErrorCode::InvalidInput,
            "stuck-low factor must lie in [0, 1]");
  }
}

std::vector<std::pair<std::string, double>> SimConfig::log_precisions() const {
  return {{"spatial_structured", std::log(tau_spatial_structured)},
          {"spatial_iid", std::log(tau_spatial_iid)},
          {"temporal_seasonal", std::log(tau_seasonal)},
          {"temporal_iid", std::log(tau_time_iid)},
          {"interaction", std::log(tau_interaction)}};
}

gmrf::SiteGraph sample_graph(int n_sites, std::uint64_t seed) {
  require(n_sites >= 2, ErrorCode::InvalidInput, "need at least 2 sites");
  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n_sites));
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::pair<int, int>> edges;
  auto add = [&](int a, int b) { edges.insert({std::min(a, b), std::max(a, b)}); };
  for (int i = 0; i + 1 < n_sites; ++i) add(order[i], order[i + 1]);
  // Chords between sites a few steps apart along the chain.
  const int chords = n_sites / 4;
  if (n_sites >= 4) {
    std::uniform_int_distribution<int> pos(0, n_sites - 1);
    std::uniform_int_distribution<int> gap(2, std::min(5, n_sites - 1));
    for (int added = 0, tries = 0; added < chords && tries < 100 * n_sites; ++tries) {
      const int i = pos(rng);
      const int j = i + gap(rng);
      if (j >= n_sites) continue;
      const auto before = edges.size();
      add(order[i], order[j]);
      if (edges.size() > before) ++added;
    }
  }
  return gmrf::SiteGraph(n_sites, {edges.begin(), edges.end()});
}

Vector sample_constrained(const gmrf::PrecisionStructure& structure, double tau, std::uint64_t seed) {
  require(tau > 0.0, ErrorCode::InvalidInput, "precision must be positive");
  std::mt19937_64 rng(seed);
  return sample_with(structure, tau, rng);
}

SimResult sample_counts(const SimConfig& cfg, const gmrf::SiteGraph& graph) {
  cfg.validate();
  require(graph.num_sites() == cfg.n_sites, ErrorCode::InvalidInput,
          "graph has " + std::to_string(graph.num_sites()) + " sites, config " +
              std::to_string(cfg.n_sites));
  std::mt19937_64 rng(cfg.seed);
  SimResult r;
  for (Date d = cfg.start; static_cast<int>(r.grid.days.size()) < cfg.n_days; d = add_days(d, 1)) {
    if (cfg.weekdays_only && is_weekend(d)) continue;
    r.grid.days.push_back(d);
  }
  r.grid.num_sites = cfg.n_sites;
  r.grid.period = cfg.period;
  const int n = cfg.n_sites;
  const int num_t = r.grid.num_times();
  const int cells = r.grid.num_cells();

  r.spatial_structured = sample_with(gmrf::build_icar_structure(graph), cfg.tau_spatial_structured, rng);
  r.spatial_iid = sample_with(gmrf::build_iid_structure(n), cfg.tau_spatial_iid, rng);
  r.seasonal = sample_with(gmrf::build_seasonal_structure(num_t, cfg.period), cfg.tau_seasonal, rng);
  r.time_iid = sample_with(gmrf::build_iid_structure(num_t), cfg.tau_time_iid, rng);
  r.interaction = sample_with(gmrf::build_iid_structure(cells), cfg.tau_interaction, rng);

  r.eta.resize(cells);
  r.counts.resize(cells);
  std::uniform_real_distribution<double> unit;
  r.frame.rows.reserve(static_cast<std::size_t>(cells));
  for (int day = 0; day < cfg.n_days; ++day) {
    for (int bin = 0; bin < cfg.period; ++bin) {
      const int t = day * cfg.period + bin;
      for (int site = 1; site <= n; ++site) {
        const int c = r.grid.cell(site, day, bin);
        const double eta = cfg.intercept + r.spatial_structured[site - 1] + r.spatial_iid[site - 1] +
                           r.seasonal[t] + r.time_iid[t] + r.interaction[c];
        r.eta[c] = eta;
        std::poisson_distribution<long> poisson(std::min(std::exp(eta), kMaxCount));
        const double count = std::min(static_cast<double>(poisson(rng)), kMaxCount);
        r.counts[c] = count;

        double recorded = count;
        if (site == cfg.zigzag_site && bin % 2 == 1) recorded = std::round(recorded * cfg.zigzag_factor);
        if (cfg.stuck_low && cfg.stuck_low->site == site && cfg.stuck_low->day == day &&
            cfg.stuck_low->bin == bin) {
          recorded = std::round(recorded * cfg.stuck_low->factor);
        }
        ingest::CountRow row;
        row.date = r.grid.days[day];
        row.time_bin = bin;
        row.id = site;
        // Always draw so the mask does not shift later random numbers.
        const bool masked = unit(rng) < cfg.mask_rate;
        if (!masked) row.sum = recorded;
        r.frame.rows.push_back(std::move(row));
      }
    }
  }
  r.frame.bin_minutes = 60;
  for (int s = 1; s <= n; ++s) r.frame.id_map[s] = s;
  r.frame.sort();
  return r;
}

}  // namespace stinla::sim
