#include "stinla/stinla.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <new>
#include <string>
#include <vector>

#include "stinla/error.hpp"
#include "stinla/evaluate.hpp"
#include "stinla/gmrf.hpp"
#include "stinla/ingest.hpp"
#include "stinla/model.hpp"
#include "stinla/sim.hpp"

struct stinla_graph {
  stinla::gmrf::SiteGraph graph;
};
struct stinla_frame {
  stinla::ingest::CountFrame frame;
};
struct stinla_config {
  stinla::Config config;
};
struct stinla_fit {
  stinla::model::FitResult fit;
};

namespace {

using namespace stinla;

thread_local std::string last_error;

stinla_status record(stinla_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs body and converts exceptions into status codes.
template <class F>
stinla_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return STINLA_OK;
  } catch (const Error& e) {
    return record(static_cast<stinla_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return record(STINLA_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(STINLA_INTERNAL, e.what());
  }
}

void require_arg(const void* p, const char* name) {
  require(p != nullptr, ErrorCode::InvalidInput, std::string(name) + " must not be null");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << std::setprecision(12);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  return in;
}

std::string in_dir(const char* dir, const char* name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

void write_optional(std::ostream& out, double v) {
  if (!std::isnan(v)) out << v;
}

}  // namespace

extern "C" {

const char* stinla_version(void) { return "0.1.0"; }

const char* stinla_last_error(void) { return last_error.c_str(); }

const char* stinla_status_name(stinla_status status) {
  if (status == STINLA_OK) return "ok";
  if (status == STINLA_INTERNAL) return "internal";
  return error_code_name(static_cast<ErrorCode>(status));
}

int stinla_status_is_numerical(stinla_status status) {
  if (status == STINLA_OK || status == STINLA_INTERNAL) return 0;
  return is_numerical(static_cast<ErrorCode>(status)) ? 1 : 0;
}

stinla_status stinla_graph_read(const char* path, stinla_graph** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new stinla_graph{gmrf::SiteGraph::read_file(path)};
  });
}

stinla_status stinla_graph_sample(int n_sites, uint64_t seed, stinla_graph** out) {
  return guarded([&] {
    require_arg(out, "out");
    *out = new stinla_graph{sim::sample_graph(n_sites, seed)};
  });
}

stinla_status stinla_graph_write(const stinla_graph* graph, const char* path) {
  return guarded([&] {
    require_arg(graph, "graph");
    require_arg(path, "path");
    graph->graph.write_file(path);
  });
}

stinla_status stinla_graph_write_grid(const stinla_graph* graph, const char* path) {
  return guarded([&] {
    require_arg(graph, "graph");
    require_arg(path, "path");
    auto out = open_out(path);
    graph->graph.write_grid_csv(out);
  });
}

int stinla_graph_num_sites(const stinla_graph* graph) { return graph ? graph->graph.num_sites() : 0; }

size_t stinla_graph_num_edges(const stinla_graph* graph) {
  return graph ? graph->graph.edges().size() : 0;
}

void stinla_graph_free(stinla_graph* graph) { delete graph; }

stinla_status stinla_frame_read(const char* path, stinla_frame** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new stinla_frame{ingest::read_count_frame_file(path)};
  });
}

stinla_status stinla_frame_clean(const char* raw_path, const char* keep_path, stinla_frame** out) {
  return guarded([&] {
    require_arg(raw_path, "raw_path");
    require_arg(keep_path, "keep_path");
    require_arg(out, "out");
    auto raw_in = open_in(raw_path);
    const auto raw = ingest::read_raw_csv(raw_in);
    auto keep_in = open_in(keep_path);
    const auto keep = ingest::read_keep_file(keep_in);
    *out = new stinla_frame{ingest::clean(raw, keep)};
  });
}

stinla_status stinla_frame_aggregate_hourly(const stinla_frame* frame, int first_hour, int end_hour,
                                            stinla_frame** out, size_t* dropped) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(out, "out");
    std::vector<std::string> warnings;
    auto hourly = ingest::aggregate_hourly(frame->frame, &warnings, {first_hour, end_hour});
    if (dropped) *dropped = warnings.size();
    *out = new stinla_frame{std::move(hourly)};
  });
}

stinla_status stinla_frame_select_weekpart(const stinla_frame* frame, const char* part,
                                           stinla_frame** out) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(part, "part");
    require_arg(out, "out");
    *out = new stinla_frame{ingest::select_weekpart(frame->frame, ingest::parse_weekpart(part))};
  });
}

stinla_status stinla_frame_write(const stinla_frame* frame, const char* path) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(path, "path");
    ingest::write_count_frame_file(frame->frame, path);
  });
}

stinla_status stinla_frame_write_id_map(const stinla_frame* frame, const char* path) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(path, "path");
    auto out = open_out(path);
    ingest::write_id_map_csv(frame->frame, out);
  });
}

stinla_status stinla_frame_write_missingness(const stinla_frame* frame, const char* by_week_path,
                                             const char* by_site_path) {
  return guarded([&] {
    require_arg(frame, "frame");
    const auto report = ingest::missingness_report(frame->frame);
    if (by_week_path) {
      auto out = open_out(by_week_path);
      ingest::write_missing_by_week_csv(report, out);
    }
    if (by_site_path) {
      auto out = open_out(by_site_path);
      ingest::write_missing_by_site_csv(report, out);
    }
  });
}

size_t stinla_frame_num_rows(const stinla_frame* frame) { return frame ? frame->frame.rows.size() : 0; }

size_t stinla_frame_num_missing(const stinla_frame* frame) {
  return frame ? static_cast<size_t>(frame->frame.num_missing()) : 0;
}

int stinla_frame_num_sites(const stinla_frame* frame) { return frame ? frame->frame.num_sites() : 0; }

stinla_status stinla_frame_date_range(const stinla_frame* frame, char* first, char* last) {
  return guarded([&] {
    require_arg(frame, "frame");
    require(!frame->frame.rows.empty(), ErrorCode::InvalidInput, "frame has no rows");
    Date lo = frame->frame.rows.front().date;
    Date hi = lo;
    for (const auto& r : frame->frame.rows) {
      lo = std::min(lo, r.date);
      hi = std::max(hi, r.date);
    }
    if (first) std::snprintf(first, 11, "%s", format_date(lo).c_str());
    if (last) std::snprintf(last, 11, "%s", format_date(hi).c_str());
  });
}

void stinla_frame_free(stinla_frame* frame) { delete frame; }

stinla_status stinla_config_new(stinla_config** out) {
  return guarded([&] {
    require_arg(out, "out");
    *out = new stinla_config{};
  });
}

stinla_status stinla_config_read(const char* path, stinla_config** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new stinla_config{Config::read_file(path)};
  });
}

stinla_status stinla_config_set(stinla_config* config, const char* key, const char* value) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(key, "key");
    require_arg(value, "value");
    config->config.set(key, value);
  });
}

stinla_status stinla_config_write(const stinla_config* config, const char* path) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(path, "path");
    auto out = open_out(path);
    config->config.write(out);
  });
}

void stinla_config_free(stinla_config* config) { delete config; }

void stinla_sim_options_default(stinla_sim_options* options) {
  if (!options) return;
  const sim::SimConfig d;
  *options = stinla_sim_options{};
  options->n_sites = d.n_sites;
  options->n_days = d.n_days;
  options->period = d.period;
  options->weekdays_only = d.weekdays_only ? 1 : 0;
  options->start_date = nullptr;
  options->intercept = d.intercept;
  options->tau_spatial_structured = d.tau_spatial_structured;
  options->tau_spatial_iid = d.tau_spatial_iid;
  options->tau_seasonal = d.tau_seasonal;
  options->tau_time_iid = d.tau_time_iid;
  options->tau_interaction = d.tau_interaction;
  options->mask_rate = d.mask_rate;
  options->zigzag_site = d.zigzag_site;
  options->zigzag_factor = d.zigzag_factor;
  options->stuck_site = 0;
  options->stuck_factor = 0.1;
  options->seed = d.seed;
}

stinla_status stinla_simulate(const stinla_sim_options* o, const stinla_graph* graph,
                              stinla_graph** graph_out, stinla_frame** frame_out,
                              const char* truth_path) {
  return guarded([&] {
    require_arg(o, "options");
    require_arg(frame_out, "frame_out");
    sim::SimConfig cfg;
    cfg.n_sites = o->n_sites;
    cfg.n_days = o->n_days;
    cfg.period = o->period;
    cfg.weekdays_only = o->weekdays_only != 0;
    if (o->start_date) cfg.start = parse_date(o->start_date);
    cfg.intercept = o->intercept;
    cfg.tau_spatial_structured = o->tau_spatial_structured;
    cfg.tau_spatial_iid = o->tau_spatial_iid;
    cfg.tau_seasonal = o->tau_seasonal;
    cfg.tau_time_iid = o->tau_time_iid;
    cfg.tau_interaction = o->tau_interaction;
    cfg.mask_rate = o->mask_rate;
    cfg.zigzag_site = o->zigzag_site;
    cfg.zigzag_factor = o->zigzag_factor;
    if (o->stuck_site > 0) cfg.stuck_low = sim::StuckLowFault{o->stuck_site, o->stuck_day, o->stuck_bin, o->stuck_factor};
    cfg.seed = o->seed;

    const gmrf::SiteGraph g = graph ? graph->graph : sim::sample_graph(cfg.n_sites, cfg.seed);
    sim::SimResult r = sim::sample_counts(cfg, g);
    if (truth_path) {
      auto out = open_out(truth_path);
      out << "Date,TimeBin,ID,Eta,Mean,Count\n";
      for (int day = 0; day < static_cast<int>(r.grid.days.size()); ++day) {
        for (int bin = 0; bin < r.grid.period; ++bin) {
          for (int site = 1; site <= r.grid.num_sites; ++site) {
            const int c = r.grid.cell(site, day, bin);
            out << format_date(r.grid.days[day]) << ',' << bin << ',' << site << ',' << r.eta[c] << ','
                << std::exp(r.eta[c]) << ',' << r.counts[c] << '\n';
          }
        }
      }
    }
    *frame_out = new stinla_frame{std::move(r.frame)};
    if (graph_out) *graph_out = new stinla_graph{g};
  });
}

stinla_status stinla_fit_model(const stinla_frame* frame, const stinla_graph* graph,
                               const stinla_config* config, const char* predict_from,
                               const char* predict_to, stinla_fit** out) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(graph, "graph");
    require_arg(out, "out");
    require((predict_from == nullptr) == (predict_to == nullptr), ErrorCode::InvalidInput,
            "give both ends of the prediction range or neither");
    const model::ModelSpec spec = model::ModelSpec::from_config(config ? config->config : Config{});
    if (predict_from) {
      *out = new stinla_fit{model::fit_holdout(spec, frame->frame, graph->graph, parse_date(predict_from),
                                               parse_date(predict_to))};
    } else {
      *out = new stinla_fit{model::fit(spec, frame->frame, graph->graph)};
    }
  });
}

stinla_status stinla_fit_read(const char* path, stinla_fit** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new stinla_fit{model::read_fit_csv_file(path)};
  });
}

stinla_status stinla_fit_write(const stinla_fit* fit, const char* path) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(path, "path");
    model::write_fit_csv_file(fit->fit, path);
  });
}

stinla_status stinla_fit_write_predictions(const stinla_fit* fit, const char* path) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(path, "path");
    const model::FitResult& f = fit->fit;
    const model::Grid& g = f.grid;
    auto out = open_out(path);
    out << "Date,TimeBin,ID,Observed,Predicted,SD\n";
    for (int day = 0; day < static_cast<int>(g.days.size()); ++day) {
      for (int bin = 0; bin < g.period; ++bin) {
        for (int site = 1; site <= g.num_sites; ++site) {
          const int c = g.cell(site, day, bin);
          if (static_cast<size_t>(c) >= f.masked.size() || !f.masked[c]) continue;
          out << format_date(g.days[day]) << ',' << bin << ',' << site << ',';
          write_optional(out, f.reference[c]);
          out << ',' << f.fitted[c] << ',' << f.fitted_sd[c] << '\n';
        }
      }
    }
  });
}

stinla_status stinla_fit_write_hyper(const stinla_fit* fit, const char* path) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(path, "path");
    auto out = open_out(path);
    model::write_hyper_csv(fit->fit, out);
  });
}

stinla_status stinla_fit_write_latent(const stinla_fit* fit, const char* path) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(path, "path");
    require(fit->fit.latent_mean.size() > 0, ErrorCode::InvalidInput,
            "fit has no latent summaries (was it read from CSV?)");
    auto out = open_out(path);
    model::write_latent_csv(fit->fit, out);
  });
}

size_t stinla_fit_num_hyper(const stinla_fit* fit) { return fit ? fit->fit.hyper_names.size() : 0; }

stinla_status stinla_fit_hyper(const stinla_fit* fit, size_t index, const char** name,
                               double* log_precision) {
  return guarded([&] {
    require_arg(fit, "fit");
    require(index < fit->fit.hyper_names.size(), ErrorCode::InvalidInput, "hyperparameter index out of range");
    if (name) *name = fit->fit.hyper_names[index].c_str();
    if (log_precision) *log_precision = fit->fit.psi_mode[static_cast<Eigen::Index>(index)];
  });
}

int stinla_fit_evaluations(const stinla_fit* fit) { return fit ? fit->fit.evaluations : 0; }

double stinla_fit_log_evidence(const stinla_fit* fit) { return fit ? fit->fit.log_evidence : 0.0; }

stinla_status stinla_fit_predict(const stinla_fit* fit, const char* const* dates, const int* time_bins,
                                 const int* site_ids, size_t n, double* out) {
  return guarded([&] {
    require_arg(fit, "fit");
    if (n == 0) return;
    require_arg(dates, "dates");
    require_arg(time_bins, "time_bins");
    require_arg(site_ids, "site_ids");
    require_arg(out, "out");
    std::vector<model::ObservationKey> keys(n);
    for (size_t i = 0; i < n; ++i) {
      require_arg(dates[i], "date");
      const int day = fit->fit.grid.day_index(parse_date(dates[i]));
      require(day >= 0, ErrorCode::InvalidInput, std::string("date ") + dates[i] + " is not in the fit");
      keys[i] = {site_ids[i], day, time_bins[i]};
    }
    const auto values = model::predict(fit->fit, keys);
    std::copy(values.begin(), values.end(), out);
  });
}

stinla_status stinla_fit_predict_file(const stinla_fit* fit, const char* keys_path, const char* out_path) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(keys_path, "keys_path");
    require_arg(out_path, "out_path");
    auto in = open_in(keys_path);
    std::string line;
    long line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty keys file", line_no);
    const auto header = ingest::split_csv_line(ingest::trim(line));
    require(header.size() >= 3 && header[0] == "Date" && header[1] == "TimeBin" && header[2] == "ID",
            ErrorCode::Parse, "keys file header must start with Date,TimeBin,ID");
    std::vector<model::ObservationKey> keys;
    std::vector<std::string> dates;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = ingest::trim(line);
      if (t.empty()) continue;
      const auto f = ingest::split_csv_line(t);
      if (f.size() < 3) throw ParseError("expected Date,TimeBin,ID", line_no);
      model::ObservationKey k;
      try {
        k.day_index = fit->fit.grid.day_index(parse_date(f[0]));
        k.time_bin = std::stoi(f[1]);
        k.site_id = std::stoi(f[2]);
      } catch (const Error& e) {
        throw ParseError(e.what(), line_no);
      } catch (const std::exception&) {
        throw ParseError("invalid key", line_no);
      }
      require(k.day_index >= 0, ErrorCode::InvalidInput, "date " + f[0] + " is not in the fit");
      keys.push_back(k);
      dates.push_back(f[0]);
    }
    const auto values = model::predict(fit->fit, keys);
    auto out = open_out(out_path);
    out << "Date,TimeBin,ID,Predicted\n";
    for (size_t i = 0; i < keys.size(); ++i) {
      out << dates[i] << ',' << keys[i].time_bin << ',' << keys[i].site_id << ',' << values[i] << '\n';
    }
  });
}

void stinla_fit_free(stinla_fit* fit) { delete fit; }

stinla_status stinla_mpe(const double* observed, const double* predicted, size_t n, double* out) {
  return guarded([&] {
    require_arg(out, "out");
    require(n == 0 || (observed && predicted), ErrorCode::InvalidInput, "null input arrays");
    *out = evaluate::mpe({observed, n}, {predicted, n});
  });
}

stinla_status stinla_evaluate(const stinla_fit* fit, const char* out_dir, double* overall) {
  return guarded([&] {
    require_arg(fit, "fit");
    const auto cells = evaluate::masked_cells(fit->fit);
    require(!cells.empty(), ErrorCode::EmptyMetric, "fit has no masked cells with known values");
    const auto report = evaluate::grouped_mpe(cells);
    if (overall) *overall = report.overall;
    if (out_dir) {
      auto out = open_out(in_dir(out_dir, "mpe_summary.csv"));
      evaluate::write_mpe_summary_csv(report, out);
    }
  });
}

stinla_status stinla_report(const stinla_fit* fit, const char* out_dir) {
  return guarded([&] {
    require_arg(fit, "fit");
    require_arg(out_dir, "out_dir");
    const auto cells = evaluate::masked_cells(fit->fit);
    require(!cells.empty(), ErrorCode::EmptyMetric, "fit has no masked cells with known values");
    const auto report = evaluate::grouped_mpe(cells);
    {
      auto out = open_out(in_dir(out_dir, "mpe_summary.csv"));
      evaluate::write_mpe_summary_csv(report, out);
    }
    {
      auto out = open_out(in_dir(out_dir, "mpe_by_site.csv"));
      evaluate::write_mpe_by_site_csv(report, out);
    }
    {
      auto out = open_out(in_dir(out_dir, "mpe_by_day.csv"));
      evaluate::write_mpe_by_day_csv(report, out);
    }
    {
      auto out = open_out(in_dir(out_dir, "mpe_by_time.csv"));
      evaluate::write_mpe_by_time_csv(report, out);
    }
    auto out = open_out(in_dir(out_dir, "mpe_by_day_time.csv"));
    evaluate::write_mpe_by_day_time_csv(report, out);
  });
}

stinla_status stinla_baseline_compare(const stinla_frame* frame, const stinla_fit* fit, const char* from,
                                      const char* to, int history_weeks, const char* out_path,
                                      double* mean_mpe, double* pred_mpe) {
  return guarded([&] {
    require_arg(frame, "frame");
    require_arg(fit, "fit");
    require_arg(from, "from");
    require_arg(to, "to");
    const auto baseline =
        evaluate::prior_mean_baseline(frame->frame, parse_date(from), parse_date(to), history_weeks);
    std::vector<evaluate::KeyedValue> preds;
    preds.reserve(baseline.size());
    std::vector<model::ObservationKey> keys;
    for (const auto& b : baseline) {
      const int day = fit->fit.grid.day_index(b.date);
      require(day >= 0, ErrorCode::InvalidInput, "date " + format_date(b.date) + " is not in the fit");
      keys.push_back({b.id, day, b.time_bin});
    }
    const auto values = model::predict(fit->fit, keys);
    for (size_t i = 0; i < baseline.size(); ++i) {
      preds.push_back({baseline[i].date, baseline[i].time_bin, baseline[i].id, values[i]});
    }
    const auto comparison = evaluate::compare(preds, baseline, frame->frame);
    if (out_path) {
      auto out = open_out(out_path);
      evaluate::write_comparison_csv(comparison, out);
    }
    if (mean_mpe) *mean_mpe = comparison.mean_mpe;
    if (pred_mpe) *pred_mpe = comparison.pred_mpe;
  });
}

}  // extern "C"
