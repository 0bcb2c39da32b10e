#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stinla/calendar.hpp"
#include "stinla/gmrf.hpp"
#include "stinla/ingest.hpp"
#include "stinla/model.hpp"

namespace stinla::sim {

// A detector stuck low for one hour: the recorded count becomes
// factor * true count.
struct StuckLowFault {
  int site = 1;
  int day = 0;  // index into the simulated days
  int bin = 0;
  double factor = 0.1;
};

struct SimConfig {
  int n_sites = 10;
  int n_days = 14;
  int period = 12;
  bool weekdays_only = false;
  Date start = Date{std::chrono::year{2018}, std::chrono::month{1}, std::chrono::day{15}};

  double intercept = 5.0;
  // Generating precisions; infinity switches a block off.
  double tau_spatial_structured = 2.0;
  double tau_spatial_iid = 8.0;
  double tau_seasonal = 200.0;
  double tau_time_iid = 50.0;
  double tau_interaction = 50.0;

  double mask_rate = 0.0;
  int zigzag_site = 0;  // 0 = none; odd bins of this site are scaled down
  double zigzag_factor = 0.3;
  std::optional<StuckLowFault> stuck_low;
  std::uint64_t seed = 1;

  void validate() const;
  // Block names as used by the model, paired with their log precisions.
  std::vector<std::pair<std::string, double>> log_precisions() const;
};

struct SimResult {
  ingest::CountFrame frame;
  model::Grid grid;
  // Per grid cell (model cell order).
  Vector eta;
  Vector counts;  // before masking and faults
  // Latent blocks.
  Vector spatial_structured;
  Vector spatial_iid;
  Vector seasonal;
  Vector time_iid;
  Vector interaction;
};

// Connected chain over a shuffled site order plus random chords.
gmrf::SiteGraph sample_graph(int n_sites, std::uint64_t seed);

// Draws from a zero-mean GMRF with precision tau * structure, conditioned on
// the structure's constraints.
Vector sample_constrained(const gmrf::PrecisionStructure& structure, double tau,
                          std::uint64_t seed);

SimResult sample_counts(const SimConfig& config, const gmrf::SiteGraph& graph);

}  // namespace stinla::sim
