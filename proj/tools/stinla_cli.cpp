// Command-line front end. Talks to the library only through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stinla/stinla.h"

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Failure {
  stinla_status status;
};

void check(stinla_status s) {
  if (s != STINLA_OK) throw Failure{s};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Graph = std::unique_ptr<stinla_graph, Deleter<stinla_graph, stinla_graph_free>>;
using Frame = std::unique_ptr<stinla_frame, Deleter<stinla_frame, stinla_frame_free>>;
using ConfigPtr = std::unique_ptr<stinla_config, Deleter<stinla_config, stinla_config_free>>;
using Fit = std::unique_ptr<stinla_fit, Deleter<stinla_fit, stinla_fit_free>>;

Graph read_graph(const std::string& path) {
  stinla_graph* g = nullptr;
  check(stinla_graph_read(path.c_str(), &g));
  return Graph(g);
}

Frame read_frame(const std::string& path) {
  stinla_frame* f = nullptr;
  check(stinla_frame_read(path.c_str(), &f));
  return Frame(f);
}

Fit read_fit(const std::string& path) {
  stinla_fit* f = nullptr;
  check(stinla_fit_read(path.c_str(), &f));
  return Fit(f);
}

Frame weekpart(const stinla_frame* frame, const std::string& part) {
  stinla_frame* f = nullptr;
  check(stinla_frame_select_weekpart(frame, part.c_str(), &f));
  return Frame(f);
}

std::string out_path(const std::string& dir, const char* name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

// Final seven days of the frame, used when no range is given.
void default_range(const stinla_frame* frame, std::string& from, std::string& to) {
  if (!from.empty() && !to.empty()) return;
  char first[11];
  char last[11];
  check(stinla_frame_date_range(frame, first, last));
  if (to.empty()) to = last;
  if (from.empty()) {
    // Seven calendar days ending at `to`.
    int y = 0, m = 0, d = 0;
    std::sscanf(to.c_str(), "%d-%d-%d", &y, &m, &d);
    std::tm t{};
    t.tm_year = y - 1900;
    t.tm_mon = m - 1;
    t.tm_mday = d - 6;
    t.tm_hour = 12;
    std::mktime(&t);
    char buf[11];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &t);
    from = buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal traffic count prediction with Gaussian Markov random fields"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(stinla_version()));

  std::string data, graph_path, config_path, part = "all", from, to, out = ".", keep, fit_path, keys,
                                              predictions_path;
  int history_weeks = 7;
  int sites = 10;
  int days = 14;
  std::uint64_t seed = 1;
  bool weekdays_only = false;
  double mask_rate = 0.0;
  int first_hour = 7;
  int end_hour = 19;
  std::vector<std::string> overrides;

  auto* clean = app.add_subcommand("clean", "Sum kept detectors, aggregate to hours and split by week part");
  clean->add_option("--data", data, "Raw detector export CSV")->required()->check(CLI::ExistingFile);
  clean->add_option("--keep", keep, "Detectors kept per site")->required()->check(CLI::ExistingFile);
  clean->add_option("--first-hour", first_hour, "First hour of the daily window")->check(CLI::Range(0, 23));
  clean->add_option("--end-hour", end_hour, "End hour (exclusive) of the daily window")->check(CLI::Range(1, 24));
  clean->add_option("--out", out, "Output directory");

  auto* fit = app.add_subcommand("fit", "Hide the prediction range, fit the model and predict it");
  fit->add_option("--data", data, "Count frame CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--graph", graph_path, "Site graph edge list")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", config_path, "Model config file")->check(CLI::ExistingFile);
  fit->add_option("--set", overrides, "Config override key=value (repeatable)");
  fit->add_option("--weekpart", part, "weekday, weekend or all")
      ->check(CLI::IsMember({"all", "weekday", "weekend"}));
  fit->add_option("--predict-from", from, "First date of the prediction range (default: last 7 days)");
  fit->add_option("--predict-to", to, "Last date of the prediction range");
  fit->add_option("--out", out, "Output directory");

  auto* predict = app.add_subcommand("predict", "Look up fitted values for a list of keys");
  predict->add_option("--fit", fit_path, "fit.csv written by fit")->required()->check(CLI::ExistingFile);
  predict->add_option("--keys", keys, "CSV with Date,TimeBin,ID")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "Output directory");

  auto* evaluate = app.add_subcommand("evaluate", "Overall MPE of the predicted cells");
  evaluate->add_option("--fit", fit_path, "fit.csv written by fit")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out, "Output directory");

  auto* report = app.add_subcommand("report", "MPE tables by site, day, time and day x time");
  report->add_option("--fit", fit_path, "fit.csv written by fit")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "Output directory");

  auto* baseline = app.add_subcommand("baseline", "Compare predictions with the prior-weeks mean");
  baseline->add_option("--data", data, "Count frame CSV with the actual values")->required()->check(CLI::ExistingFile);
  baseline->add_option("--fit", fit_path, "fit.csv written by fit")->required()->check(CLI::ExistingFile);
  baseline->add_option("--history-weeks", history_weeks, "Weeks of history to average")->check(CLI::PositiveNumber);
  baseline->add_option("--predict-from", from, "First date of the target range (default: last 7 days)");
  baseline->add_option("--predict-to", to, "Last date of the target range");
  baseline->add_option("--weekpart", part, "weekday, weekend or all")
      ->check(CLI::IsMember({"all", "weekday", "weekend"}));
  baseline->add_option("--out", out, "Output directory");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic network and counts");
  simulate->add_option("--sites", sites, "Number of sites")->check(CLI::Range(2, 100000));
  simulate->add_option("--days", days, "Number of days")->check(CLI::Range(1, 100000));
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--graph", graph_path, "Use this graph instead of sampling one")->check(CLI::ExistingFile);
  simulate->add_flag("--weekdays-only", weekdays_only, "Skip Saturdays and Sundays");
  simulate->add_option("--mask-rate", mask_rate, "Fraction of cells recorded as missing")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*clean) {
      stinla_frame* raw = nullptr;
      check(stinla_frame_clean(data.c_str(), keep.c_str(), &raw));
      Frame half(raw);
      check(stinla_frame_write(half.get(), out_path(out, "counts_30min.csv").c_str()));
      check(stinla_frame_write_id_map(half.get(), out_path(out, "id_map.csv").c_str()));
      check(stinla_frame_write_missingness(half.get(), out_path(out, "missing_by_week.csv").c_str(),
                                           out_path(out, "missing_by_site.csv").c_str()));
      stinla_frame* hourly_raw = nullptr;
      size_t dropped = 0;
      check(stinla_frame_aggregate_hourly(half.get(), first_hour, end_hour, &hourly_raw, &dropped));
      Frame hourly(hourly_raw);
      if (dropped > 0) std::cerr << "warning: " << dropped << " incomplete half-hour pairs dropped\n";
      check(stinla_frame_write(hourly.get(), out_path(out, "counts_hourly.csv").c_str()));
      check(stinla_frame_write(weekpart(hourly.get(), "weekday").get(), out_path(out, "counts_weekday.csv").c_str()));
      check(stinla_frame_write(weekpart(hourly.get(), "weekend").get(), out_path(out, "counts_weekend.csv").c_str()));
      std::cout << stinla_frame_num_rows(half.get()) << " half-hour rows, " << stinla_frame_num_missing(half.get())
                << " missing, " << stinla_frame_num_sites(half.get()) << " sites\n";
    } else if (*fit) {
      Frame all = read_frame(data);
      Frame frame = weekpart(all.get(), part);
      Graph graph = read_graph(graph_path);
      stinla_config* cfg_raw = nullptr;
      if (config_path.empty()) {
        check(stinla_config_new(&cfg_raw));
      } else {
        check(stinla_config_read(config_path.c_str(), &cfg_raw));
      }
      ConfigPtr cfg(cfg_raw);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
          return kUsage;
        }
        check(stinla_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
      }
      default_range(frame.get(), from, to);
      stinla_fit* fit_raw = nullptr;
      check(stinla_fit_model(frame.get(), graph.get(), cfg.get(), from.c_str(), to.c_str(), &fit_raw));
      Fit result(fit_raw);
      check(stinla_fit_write(result.get(), out_path(out, "fit.csv").c_str()));
      check(stinla_fit_write_predictions(result.get(), out_path(out, "predictions.csv").c_str()));
      check(stinla_fit_write_hyper(result.get(), out_path(out, "hyper.csv").c_str()));
      check(stinla_fit_write_latent(result.get(), out_path(out, "latent.csv").c_str()));
      std::cout << "predicted " << from << " to " << to << " after " << stinla_fit_evaluations(result.get())
                << " hyperparameter evaluations\n";
      for (size_t i = 0; i < stinla_fit_num_hyper(result.get()); ++i) {
        const char* name = nullptr;
        double value = 0.0;
        check(stinla_fit_hyper(result.get(), i, &name, &value));
        std::cout << "  log precision " << name << " = " << value << '\n';
      }
    } else if (*predict) {
      Fit result = read_fit(fit_path);
      check(stinla_fit_predict_file(result.get(), keys.c_str(), out_path(out, "predictions.csv").c_str()));
    } else if (*evaluate) {
      Fit result = read_fit(fit_path);
      double overall = 0.0;
      check(stinla_evaluate(result.get(), out.c_str(), &overall));
      std::cout << "MPE " << overall << '\n';
    } else if (*report) {
      Fit result = read_fit(fit_path);
      check(stinla_report(result.get(), out.c_str()));
    } else if (*baseline) {
      Frame all = read_frame(data);
      Frame frame = weekpart(all.get(), part);
      Fit result = read_fit(fit_path);
      default_range(frame.get(), from, to);
      double mean_mpe = 0.0;
      double pred_mpe = 0.0;
      check(stinla_baseline_compare(frame.get(), result.get(), from.c_str(), to.c_str(), history_weeks,
                                    out_path(out, "comparison.csv").c_str(), &mean_mpe, &pred_mpe));
      std::cout << "baseline MPE " << mean_mpe << ", model MPE " << pred_mpe << '\n';
    } else if (*simulate) {
      stinla_sim_options opts;
      stinla_sim_options_default(&opts);
      opts.n_sites = sites;
      opts.n_days = days;
      opts.seed = seed;
      opts.weekdays_only = weekdays_only ? 1 : 0;
      opts.mask_rate = mask_rate;
      Graph given;
      if (!graph_path.empty()) {
        given = read_graph(graph_path);
        opts.n_sites = stinla_graph_num_sites(given.get());
      }
      stinla_graph* g_raw = nullptr;
      stinla_frame* f_raw = nullptr;
      check(stinla_simulate(&opts, given.get(), &g_raw, &f_raw, out_path(out, "truth.csv").c_str()));
      Graph g(g_raw);
      Frame f(f_raw);
      check(stinla_graph_write(g.get(), out_path(out, "graph.txt").c_str()));
      check(stinla_frame_write(f.get(), out_path(out, "counts.csv").c_str()));
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << stinla_status_name(f.status) << "): " << stinla_last_error() << '\n';
    return stinla_status_is_numerical(f.status) ? kNumerical : kData;
  }
  return kOk;
}
