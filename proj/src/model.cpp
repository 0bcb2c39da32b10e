#include "stinla/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "stinla/error.hpp"

namespace stinla::model {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

void ModelSpec::validate() const {
  require(period >= 2, ErrorCode::InvalidSpec, "season length must be at least 2");
  require(interaction == Interaction::None || (spatial && (temporal_structured || temporal_iid)),
          ErrorCode::InvalidSpec,
          "an interaction needs both a spatial and a temporal component");
  require(hyperprior_shape > 0.0 && hyperprior_rate > 0.0, ErrorCode::InvalidSpec,
          "hyperprior parameters must be positive");
  require(jitter >= 0.0, ErrorCode::InvalidSpec, "jitter must be non-negative");
  require(fixed_effect_precision > 0.0, ErrorCode::InvalidSpec,
          "fixed-effect precision must be positive");
  require(eb_tolerance > 0.0 && eb_max_evaluations > 0, ErrorCode::InvalidSpec,
          "invalid empirical Bayes search settings");
  require(intercept || !fixed_effects.empty() || spatial || temporal_structured || temporal_iid ||
              interaction != Interaction::None,
          ErrorCode::InvalidSpec, "model has no latent components");
}

ModelSpec ModelSpec::from_config(const Config& c) {
  ModelSpec s;
  const std::string family = lower(c.get_string("family", "poisson"));
  if (family == "poisson") {
    s.family = Family::Poisson;
  } else if (family == "gaussian") {
    s.family = Family::Gaussian;
  } else {
    fail(ErrorCode::InvalidSpec, "family must be poisson or gaussian, got '" + family + "'");
  }
  s.period = static_cast<int>(c.get_int("period", s.period));
  const std::string inter = lower(c.get_string("interaction", "type1"));
  if (inter == "none") {
    s.interaction = Interaction::None;
  } else if (inter == "type1" || inter == "typei" || inter == "i") {
    s.interaction = Interaction::TypeI;
  } else {
    fail(ErrorCode::InvalidSpec, "interaction must be none or type1, got '" + inter + "'");
  }
  s.intercept = c.get_bool("intercept", s.intercept);
  s.spatial = c.get_bool("spatial", s.spatial);
  s.temporal_structured = c.get_bool("seasonal", s.temporal_structured);
  s.temporal_iid = c.get_bool("temporal_iid", s.temporal_iid);
  s.fixed_effects = c.get_list("covariates");
  s.hyperprior_shape = c.get_double("hyperprior_a", s.hyperprior_shape);
  s.hyperprior_rate = c.get_double("hyperprior_b", s.hyperprior_rate);
  s.jitter = c.get_double("jitter", s.jitter);
  s.fixed_effect_precision = c.get_double("fixed_precision", s.fixed_effect_precision);
  s.init_log_precision = c.get_double("init_log_precision", s.init_log_precision);
  const std::string sc = lower(c.get_string("seasonal_constraint", "phase"));
  if (sc == "phase") {
    s.seasonal_constraint = SeasonalConstraint::Phase;
  } else if (sc == "sum") {
    s.seasonal_constraint = SeasonalConstraint::Sum;
  } else {
    fail(ErrorCode::InvalidSpec, "seasonal_constraint must be phase or sum, got '" + sc + "'");
  }
  s.eb_tolerance = c.get_double("eb_tolerance", s.eb_tolerance);
  s.eb_max_evaluations = static_cast<int>(c.get_int("eb_max_evaluations", s.eb_max_evaluations));
  s.validate();
  return s;
}

const Block* LatentLayout::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

int Grid::day_index(const Date& d) const {
  const auto it = std::lower_bound(days.begin(), days.end(), d);
  if (it == days.end() || *it != d) return -1;
  return static_cast<int>(it - days.begin());
}

namespace {

// Structure matrix of one random block and how its precision enters.
struct RandomBlock {
  int offset = 0;
  SparseMatrix structure;
  bool intrinsic = false;
};

struct StaticParts {
  std::vector<RandomBlock> random;  // one per precision hyperparameter
  std::vector<std::pair<int, int>> fixed;  // (offset, length), prior precision fixed
  int dim = 0;
  DenseMatrix constraints;
  SparseRowMatrix design;
  Vector observations;
  laplace::Likelihood likelihood = laplace::Likelihood::PoissonLog;
  double jitter = 0.0;
  double fixed_precision = 0.0;
};

laplace::LatentGaussianProblem build_problem(const StaticParts& s, const Vector& psi) {
  std::vector<Triplet> triplets;
  for (const auto& [offset, length] : s.fixed) {
    for (int i = 0; i < length; ++i) triplets.emplace_back(offset + i, offset + i, s.fixed_precision);
  }
  for (std::size_t b = 0; b < s.random.size(); ++b) {
    const RandomBlock& rb = s.random[b];
    const double tau = std::exp(psi[static_cast<Eigen::Index>(b)]);
    for (int k = 0; k < rb.structure.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(rb.structure, k); it; ++it) {
        triplets.emplace_back(rb.offset + it.row(), rb.offset + it.col(), tau * it.value());
      }
      if (rb.intrinsic) triplets.emplace_back(rb.offset + k, rb.offset + k, s.jitter);
    }
  }
  laplace::LatentGaussianProblem p;
  p.prior_precision.entries.resize(s.dim, s.dim);
  p.prior_precision.entries.setFromTriplets(triplets.begin(), triplets.end());
  p.prior_precision.constraints = s.constraints;
  p.prior_mean = Vector::Zero(s.dim);
  p.design = s.design;
  p.offset = Vector::Zero(s.design.rows());
  p.likelihood = s.likelihood;
  if (s.likelihood == laplace::Likelihood::GaussianIdentity) {
    p.noise_precision = std::exp(psi[psi.size() - 1]);
  }
  p.observations = s.observations;
  return p;
}

}  // namespace

AssembledModel assemble(const ModelSpec& spec, const ingest::CountFrame& data,
                        const gmrf::SiteGraph& graph) {
  spec.validate();
  data.validate();
  require(!data.rows.empty(), ErrorCode::InvalidInput, "no data rows");
  const int n = graph.num_sites();
  std::set<Date> dates;
  for (const auto& r : data.rows) {
    require(r.id <= n, ErrorCode::InvalidInput,
            "site " + std::to_string(r.id) + " is not in the graph (" + std::to_string(n) +
                " sites)");
    require(r.time_bin < spec.period, ErrorCode::InvalidInput,
            "time bin " + std::to_string(r.time_bin) + " is not below the season length " +
                std::to_string(spec.period));
    dates.insert(r.date);
  }

  AssembledModel am;
  am.grid.days.assign(dates.begin(), dates.end());
  am.grid.num_sites = n;
  am.grid.period = spec.period;
  const int num_t = am.grid.num_times();
  const int cells = am.grid.num_cells();

  std::vector<std::size_t> cov_column;
  for (const auto& name : spec.fixed_effects) {
    const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), name);
    require(it != data.covariate_names.end(), ErrorCode::InvalidSpec,
            "covariate '" + name + "' is not a column of the data");
    cov_column.push_back(static_cast<std::size_t>(it - data.covariate_names.begin()));
  }

  auto add_block = [&](const std::string& name, int length) {
    am.layout.blocks.push_back(Block{name, am.layout.dim, length});
    am.layout.dim += length;
    return am.layout.blocks.back().offset;
  };
  StaticParts parts;
  const int m = static_cast<int>(spec.fixed_effects.size());
  int off_intercept = -1;
  int off_fixed = -1;
  int off_icar = -1;
  int off_space = -1;
  int off_seasonal = -1;
  int off_time = -1;
  int off_inter = -1;
  if (spec.intercept) {
    off_intercept = add_block("intercept", 1);
    parts.fixed.emplace_back(off_intercept, 1);
  }
  if (m > 0) {
    off_fixed = add_block("fixed_effects", m);
    parts.fixed.emplace_back(off_fixed, m);
  }

  std::vector<gmrf::PrecisionStructure> constrained;
  std::vector<int> constrained_offset;
  if (spec.spatial) {
    gmrf::PrecisionStructure icar = gmrf::build_icar_structure(graph);
    off_icar = add_block("spatial_structured", n);
    parts.random.push_back({off_icar, icar.entries, true});
    am.hyper_names.push_back("spatial_structured");
    constrained.push_back(std::move(icar));
    constrained_offset.push_back(off_icar);
    off_space = add_block("spatial_iid", n);
    parts.random.push_back({off_space, sparse_identity(n), false});
    am.hyper_names.push_back("spatial_iid");
  }
  if (spec.temporal_structured) {
    gmrf::PrecisionStructure seasonal = gmrf::build_seasonal_structure(num_t, spec.period);
    if (spec.seasonal_constraint == SeasonalConstraint::Sum) {
      seasonal.constraints = DenseMatrix::Ones(1, num_t);
    }
    off_seasonal = add_block("temporal_seasonal", num_t);
    parts.random.push_back({off_seasonal, seasonal.entries, true});
    am.hyper_names.push_back("temporal_seasonal");
    constrained.push_back(std::move(seasonal));
    constrained_offset.push_back(off_seasonal);
  }
  if (spec.temporal_iid) {
    off_time = add_block("temporal_iid", num_t);
    parts.random.push_back({off_time, sparse_identity(num_t), false});
    am.hyper_names.push_back("temporal_iid");
  }
  if (spec.interaction == Interaction::TypeI) {
    // I (x) I = I over the site x time grid.
    const gmrf::PrecisionStructure inter =
        gmrf::kronecker(gmrf::build_iid_structure(num_t), gmrf::build_iid_structure(n));
    off_inter = add_block("interaction", cells);
    parts.random.push_back({off_inter, inter.entries, false});
    am.hyper_names.push_back("interaction");
  }
  if (spec.family == Family::Gaussian) am.hyper_names.push_back("noise");

  const int dim = am.layout.dim;
  parts.dim = dim;
  int num_constraints = 0;
  for (const auto& c : constrained) num_constraints += c.num_constraints();
  parts.constraints = DenseMatrix::Zero(num_constraints, dim);
  for (std::size_t i = 0, row = 0; i < constrained.size(); ++i) {
    const auto& c = constrained[i].constraints;
    parts.constraints.block(static_cast<Eigen::Index>(row), constrained_offset[i], c.rows(), c.cols()) = c;
    row += static_cast<std::size_t>(c.rows());
  }

  // Observations and covariates per cell.
  am.observations = Vector::Constant(cells, kNaN);
  std::vector<const ingest::CountRow*> row_of(static_cast<std::size_t>(cells), nullptr);
  for (const auto& r : data.rows) {
    const int c = am.grid.cell(r.id, am.grid.day_index(r.date), r.time_bin);
    row_of[c] = &r;
    if (r.sum) am.observations[c] = *r.sum;
  }

  am.cell_index.resize(static_cast<std::size_t>(cells));
  am.cell_weight.resize(static_cast<std::size_t>(cells));
  std::vector<Triplet> design;
  design.reserve(static_cast<std::size_t>(cells) * (6 + m));
  for (int day = 0; day < static_cast<int>(am.grid.days.size()); ++day) {
    for (int bin = 0; bin < spec.period; ++bin) {
      const int t = day * spec.period + bin;
      for (int site = 1; site <= n; ++site) {
        const int c = am.grid.cell(site, day, bin);
        auto& idx = am.cell_index[c];
        auto& w = am.cell_weight[c];
        auto load = [&](int index, double weight) {
          idx.push_back(index);
          w.push_back(weight);
        };
        if (off_intercept >= 0) load(off_intercept, 1.0);
        if (m > 0) {
          require(row_of[c] != nullptr, ErrorCode::InvalidInput,
                  "covariates missing for site " + std::to_string(site) + " on " +
                      format_date(am.grid.days[day]) + " bin " + std::to_string(bin));
          for (int j = 0; j < m; ++j) load(off_fixed + j, row_of[c]->covariates[cov_column[j]]);
        }
        if (off_icar >= 0) load(off_icar + site - 1, 1.0);
        if (off_space >= 0) load(off_space + site - 1, 1.0);
        if (off_seasonal >= 0) load(off_seasonal + t, 1.0);
        if (off_time >= 0) load(off_time + t, 1.0);
        if (off_inter >= 0) load(off_inter + c, 1.0);
        for (std::size_t k = 0; k < idx.size(); ++k) design.emplace_back(c, idx[k], w[k]);
      }
    }
  }
  parts.design.resize(cells, dim);
  parts.design.setFromTriplets(design.begin(), design.end());
  parts.design.makeCompressed();
  parts.observations = am.observations;
  parts.likelihood = spec.family == Family::Poisson ? laplace::Likelihood::PoissonLog
                                                    : laplace::Likelihood::GaussianIdentity;
  parts.jitter = spec.jitter;
  parts.fixed_precision = spec.fixed_effect_precision;

  am.init_psi = Vector::Constant(static_cast<Eigen::Index>(am.hyper_names.size()),
                                 spec.init_log_precision);
  if (spec.family == Family::Gaussian) {
    double sum = 0.0;
    double sum2 = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < am.observations.size(); ++i) {
      if (std::isnan(am.observations[i])) continue;
      sum += am.observations[i];
      sum2 += am.observations[i] * am.observations[i];
      ++count;
    }
    const double var = count > 1 ? (sum2 - sum * sum / count) / (count - 1) : 0.0;
    am.init_psi[am.init_psi.size() - 1] = var > 0.0 ? -std::log(var) : 0.0;
  }

  auto shared = std::make_shared<const StaticParts>(std::move(parts));
  am.builder = [shared](const Vector& psi) { return build_problem(*shared, psi); };
  return am;
}

FitResult fit(const ModelSpec& spec, const ingest::CountFrame& data, const gmrf::SiteGraph& graph) {
  const AssembledModel am = assemble(spec, data, graph);
  laplace::EbOptions options;
  options.hyperprior = laplace::gamma_log_precision_prior(spec.hyperprior_shape, spec.hyperprior_rate);
  options.tolerance = spec.eb_tolerance;
  options.max_evaluations = spec.eb_max_evaluations;
  const laplace::EbResult eb = laplace::eb_optimize(am.builder, am.init_psi, options);

  FitResult r;
  r.layout = am.layout;
  r.grid = am.grid;
  r.latent_mean = eb.fit.mode;
  r.latent_sd = eb.fit.marginal_sds;
  r.hyper_names = am.hyper_names;
  r.psi_mode = eb.psi_mode;
  r.log_evidence = eb.log_posterior - options.hyperprior(eb.psi_mode);
  r.evaluations = eb.evaluations;
  r.observed = am.observations;
  r.reference = am.observations;
  r.masked.assign(static_cast<std::size_t>(am.grid.num_cells()), 0);

  const int cells = am.grid.num_cells();
  r.eta_mean.resize(cells);
  r.eta_var.resize(cells);
  r.fitted.resize(cells);
  r.fitted_sd.resize(cells);
  for (int c = 0; c < cells; ++c) {
    const auto& idx = am.cell_index[c];
    const auto& w = am.cell_weight[c];
    double eta = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) eta += w[k] * eb.fit.mode[idx[k]];
    const double var = std::max(0.0, eb.fit.linear_combination_variance(idx, w));
    r.eta_mean[c] = eta;
    r.eta_var[c] = var;
    if (spec.family == Family::Poisson) {
      r.fitted[c] = std::exp(eta + 0.5 * var);
      r.fitted_sd[c] = r.fitted[c] * std::sqrt(std::expm1(var));
    } else {
      r.fitted[c] = eta;
      r.fitted_sd[c] = std::sqrt(var);
    }
  }
  return r;
}

FitResult fit_holdout(const ModelSpec& spec, const ingest::CountFrame& data,
                      const gmrf::SiteGraph& graph, const Date& from, const Date& to) {
  require(from <= to, ErrorCode::InvalidInput, "prediction range is reversed");
  ingest::CountFrame hidden = data;
  bool any = false;
  for (auto& r : hidden.rows) {
    if (r.date < from || to < r.date) continue;
    r.sum.reset();
    any = true;
  }
  require(any, ErrorCode::InvalidInput,
          "prediction range " + format_date(from) + " to " + format_date(to) + " has no rows");
  FitResult r = fit(spec, hidden, graph);
  for (const auto& row : data.rows) {
    if (row.date < from || to < row.date) continue;
    const int c = r.grid.cell(row.id, r.grid.day_index(row.date), row.time_bin);
    r.masked[c] = 1;
    r.reference[c] = row.sum ? *row.sum : kNaN;
  }
  return r;
}

std::vector<double> predict(const FitResult& fit, std::span<const ObservationKey> keys) {
  std::vector<double> out;
  out.reserve(keys.size());
  const Grid& g = fit.grid;
  for (const auto& k : keys) {
    require(k.site_id >= 1 && k.site_id <= g.num_sites && k.day_index >= 0 &&
                k.day_index < static_cast<int>(g.days.size()) && k.time_bin >= 0 &&
                k.time_bin < g.period,
            ErrorCode::InvalidInput,
            "key (site " + std::to_string(k.site_id) + ", day " + std::to_string(k.day_index) +
                ", bin " + std::to_string(k.time_bin) + ") is outside the fitted layout");
    const double v = fit.fitted[g.cell(k.site_id, k.day_index, k.time_bin)];
    require(!std::isnan(v), ErrorCode::InvalidInput, "no fitted value stored for key");
    out.push_back(v);
  }
  return out;
}

void write_fit_csv(const FitResult& fit, std::ostream& out) {
  const Grid& g = fit.grid;
  out << "Date,TimeBin,ID,Observed,Fitted,SD,Masked\n";
  out << std::setprecision(12);
  for (int day = 0; day < static_cast<int>(g.days.size()); ++day) {
    for (int bin = 0; bin < g.period; ++bin) {
      for (int site = 1; site <= g.num_sites; ++site) {
        const int c = g.cell(site, day, bin);
        if (std::isnan(fit.fitted[c])) continue;
        double obs = c < fit.reference.size() ? fit.reference[c] : kNaN;
        if (std::isnan(obs) && c < fit.observed.size()) obs = fit.observed[c];
        out << format_date(g.days[day]) << ',' << bin << ',' << site << ',';
        if (!std::isnan(obs)) out << obs;
        out << ',' << fit.fitted[c] << ',' << fit.fitted_sd[c] << ','
            << (static_cast<std::size_t>(c) < fit.masked.size() && fit.masked[c] ? 1 : 0) << '\n';
      }
    }
  }
}

void write_fit_csv_file(const FitResult& fit, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  write_fit_csv(fit, out);
}

FitResult read_fit_csv(std::istream& in) {
  struct Row {
    Date date;
    int bin;
    int id;
    double observed;
    double fitted;
    double sd;
    bool masked;
  };
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!ingest::trim(line).empty()) header = ingest::split_csv_line(ingest::trim(line));
  }
  const std::vector<std::string> expected{"Date", "TimeBin", "ID", "Observed", "Fitted", "SD", "Masked"};
  if (header != expected) throw ParseError("fit CSV header must be Date,TimeBin,ID,Observed,Fitted,SD,Masked", line_no);

  auto number = [&](const std::string& s, const char* what) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError(std::string("invalid ") + what + " '" + s + "'", line_no);
    }
  };
  std::vector<Row> rows;
  std::set<Date> dates;
  int max_id = 0;
  int max_bin = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (ingest::trim(line).empty()) continue;
    const auto f = ingest::split_csv_line(line);
    if (f.size() != expected.size()) throw ParseError("expected 7 fields", line_no);
    Row r;
    try {
      r.date = parse_date(f[0]);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    r.bin = static_cast<int>(number(f[1], "TimeBin"));
    r.id = static_cast<int>(number(f[2], "ID"));
    if (r.bin < 0 || r.id < 1) throw ParseError("invalid key", line_no);
    r.observed = f[3].empty() ? kNaN : number(f[3], "Observed");
    r.fitted = number(f[4], "Fitted");
    r.sd = number(f[5], "SD");
    r.masked = number(f[6], "Masked") != 0.0;
    dates.insert(r.date);
    max_id = std::max(max_id, r.id);
    max_bin = std::max(max_bin, r.bin);
    rows.push_back(r);
  }
  require(!rows.empty(), ErrorCode::InvalidInput, "fit CSV has no rows");

  FitResult fit;
  fit.grid.days.assign(dates.begin(), dates.end());
  fit.grid.num_sites = max_id;
  fit.grid.period = std::max(2, max_bin + 1);
  const int cells = fit.grid.num_cells();
  fit.fitted = Vector::Constant(cells, kNaN);
  fit.fitted_sd = Vector::Constant(cells, kNaN);
  fit.observed = Vector::Constant(cells, kNaN);
  fit.reference = Vector::Constant(cells, kNaN);
  fit.masked.assign(static_cast<std::size_t>(cells), 0);
  for (const auto& r : rows) {
    const int c = fit.grid.cell(r.id, fit.grid.day_index(r.date), r.bin);
    fit.fitted[c] = r.fitted;
    fit.fitted_sd[c] = r.sd;
    fit.reference[c] = r.observed;
    fit.masked[c] = r.masked ? 1 : 0;
    fit.observed[c] = r.masked ? kNaN : r.observed;
  }
  return fit;
}

FitResult read_fit_csv_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open fit file '" + path + "'");
  return read_fit_csv(in);
}

void write_hyper_csv(const FitResult& fit, std::ostream& out) {
  out << "Name,LogPrecision,Precision\n" << std::setprecision(12);
  for (std::size_t i = 0; i < fit.hyper_names.size(); ++i) {
    const double v = fit.psi_mode[static_cast<Eigen::Index>(i)];
    out << fit.hyper_names[i] << ',' << v << ',' << std::exp(v) << '\n';
  }
}

void write_latent_csv(const FitResult& fit, std::ostream& out) {
  out << "Block,Index,Mean,SD\n" << std::setprecision(12);
  for (const auto& b : fit.layout.blocks) {
    for (int i = 0; i < b.length; ++i) {
      out << b.name << ',' << i << ',' << fit.latent_mean[b.offset + i] << ','
          << (fit.latent_sd.size() > 0 ? fit.latent_sd[b.offset + i] : kNaN) << '\n';
    }
  }
}

}  // namespace stinla::model
