#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stinla/calendar.hpp"
#include "stinla/config.hpp"
#include "stinla/gmrf.hpp"
#include "stinla/ingest.hpp"
#include "stinla/laplace.hpp"

namespace stinla::model {

enum class Family { Poisson, Gaussian };
enum class Interaction { None, TypeI };
// How the seasonal block's null space is handled: Phase constrains the sums
// over phases 0..p-2 to zero, Sum only constrains the overall sum.
enum class SeasonalConstraint { Phase, Sum };

struct ModelSpec {
  bool intercept = true;
  std::vector<std::string> fixed_effects;
  bool spatial = true;  // BYM: ICAR plus iid site effect
  bool temporal_structured = true;
  int period = 12;
  bool temporal_iid = true;
  Interaction interaction = Interaction::TypeI;
  Family family = Family::Poisson;

  double hyperprior_shape = 1.0;
  double hyperprior_rate = 5e-5;
  double jitter = 1e-6;
  double fixed_effect_precision = 1e-6;
  double init_log_precision = 4.0;
  SeasonalConstraint seasonal_constraint = SeasonalConstraint::Phase;
  double eb_tolerance = 1e-4;
  int eb_max_evaluations = 500;

  void validate() const;
  // Keys: family, period, interaction, temporal_iid, spatial, seasonal,
  // intercept, covariates, hyperprior_a, hyperprior_b, jitter,
  // fixed_precision, init_log_precision, seasonal_constraint,
  // eb_tolerance, eb_max_evaluations.
  static ModelSpec from_config(const Config& config);
};

struct Block {
  std::string name;
  int offset = 0;
  int length = 0;
};

struct LatentLayout {
  std::vector<Block> blocks;
  int dim = 0;

  const Block* find(const std::string& name) const;
};

// Full site x time grid the model is fitted on. Time index t = day * period +
// bin; cell index = t * num_sites + (site - 1).
struct Grid {
  std::vector<Date> days;
  int num_sites = 0;
  int period = 0;

  int num_times() const noexcept { return static_cast<int>(days.size()) * period; }
  int num_cells() const noexcept { return num_times() * num_sites; }
  int cell(int site, int day, int bin) const noexcept {
    return (day * period + bin) * num_sites + (site - 1);
  }
  int day_index(const Date& d) const;  // -1 when absent
};

struct ObservationKey {
  int site_id = 1;
  int day_index = 0;
  int time_bin = 0;
};

struct AssembledModel {
  LatentLayout layout;
  Grid grid;
  std::vector<std::string> hyper_names;
  Vector init_psi;
  laplace::ProblemBuilder builder;
  // Per grid cell, the latent entries its linear predictor loads on.
  std::vector<std::vector<int>> cell_index;
  std::vector<std::vector<double>> cell_weight;
  Vector observations;  // per grid cell, NaN when missing
};

AssembledModel assemble(const ModelSpec& spec, const ingest::CountFrame& data,
                        const gmrf::SiteGraph& graph);

struct FitResult {
  LatentLayout layout;
  Grid grid;
  Vector latent_mean;
  Vector latent_sd;
  std::vector<std::string> hyper_names;
  Vector psi_mode;  // log precisions
  // Per grid cell.
  Vector eta_mean;
  Vector eta_var;
  Vector fitted;     // response-scale posterior mean
  Vector fitted_sd;  // response-scale posterior sd
  Vector observed;   // values the model saw (NaN = missing)
  Vector reference;  // values to score against (NaN = unknown)
  std::vector<char> masked;
  double log_evidence = 0.0;
  int evaluations = 0;
};

FitResult fit(const ModelSpec& spec, const ingest::CountFrame& data, const gmrf::SiteGraph& graph);

// Hides the rows dated in [from, to], fits through them and marks those cells
// as masked with their original values as the reference.
FitResult fit_holdout(const ModelSpec& spec, const ingest::CountFrame& data,
                      const gmrf::SiteGraph& graph, const Date& from, const Date& to);

std::vector<double> predict(const FitResult& fit, std::span<const ObservationKey> keys);

// CSV with one row per grid cell: Date,TimeBin,ID,Observed,Fitted,SD,Masked.
void write_fit_csv(const FitResult& fit, std::ostream& out);
void write_fit_csv_file(const FitResult& fit, const std::string& path);
// Restores the grid and per-cell columns; latent summaries are left empty.
FitResult read_fit_csv(std::istream& in);
FitResult read_fit_csv_file(const std::string& path);

void write_hyper_csv(const FitResult& fit, std::ostream& out);
void write_latent_csv(const FitResult& fit, std::ostream& out);

}  // namespace stinla::model
