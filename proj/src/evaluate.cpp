#include "stinla/evaluate.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <tuple>

#include "stinla/error.hpp"

namespace stinla::evaluate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Accumulator {
  double sum = 0.0;
  long count = 0;
  long seen = 0;

  GroupMpe finish() const { return {sum / static_cast<double>(count), count}; }
};

template <class Key, class Describe>
void finish_groups(const std::map<Key, Accumulator>& acc, std::map<Key, GroupMpe>& out,
                   std::vector<std::string>& notes, Describe describe) {
  for (const auto& [key, a] : acc) {
    if (a.count == 0) {
      notes.push_back(describe(key) + ": no cells with a positive observation, omitted");
    } else {
      out[key] = a.finish();
    }
  }
}

void write_value(std::ostream& out, double v) {
  if (!std::isnan(v)) out << v;
}

}  // namespace

double percentage_error(double observed, double predicted) {
  if (std::isnan(observed) || observed == 0.0) return kNaN;
  return std::abs(observed - predicted) / observed * 100.0;
}

double mpe(std::span<const double> observed, std::span<const double> predicted) {
  require(observed.size() == predicted.size(), ErrorCode::InvalidInput,
          "observed and predicted lengths differ");
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double pe = percentage_error(observed[i], predicted[i]);
    if (std::isnan(pe)) continue;
    sum += pe;
    ++count;
  }
  require(count > 0, ErrorCode::EmptyMetric, "no observations to score");
  return sum / static_cast<double>(count);
}

MpeReport grouped_mpe(std::span<const ScoredCell> cells) {
  std::map<int, Accumulator> site;
  std::map<int, Accumulator> day;
  std::map<int, Accumulator> time;
  std::map<std::pair<int, int>, Accumulator> day_time;
  Accumulator all;
  for (const auto& c : cells) {
    const int wd = weekday_index(c.date);
    Accumulator* groups[] = {&site[c.id], &day[wd], &time[c.time_bin], &day_time[{wd, c.time_bin}],
                             &all};
    const double pe = percentage_error(c.observed, c.predicted);
    for (Accumulator* a : groups) {
      ++a->seen;
      if (std::isnan(pe)) continue;
      a->sum += pe;
      ++a->count;
    }
  }
  require(all.count > 0, ErrorCode::EmptyMetric, "no observations to score");
  MpeReport r;
  r.overall = all.sum / static_cast<double>(all.count);
  r.count = all.count;
  finish_groups(site, r.by_site, r.notes, [](int k) { return "site " + std::to_string(k); });
  finish_groups(day, r.by_day, r.notes, [](int k) { return std::string(weekday_name(k)); });
  finish_groups(time, r.by_time, r.notes, [](int k) { return "time bin " + std::to_string(k); });
  finish_groups(day_time, r.by_day_time, r.notes, [](const std::pair<int, int>& k) {
    return std::string(weekday_name(k.first)) + " bin " + std::to_string(k.second);
  });
  return r;
}

std::vector<ScoredCell> masked_cells(const model::FitResult& fit) {
  const model::Grid& g = fit.grid;
  std::vector<ScoredCell> out;
  for (int day = 0; day < static_cast<int>(g.days.size()); ++day) {
    for (int bin = 0; bin < g.period; ++bin) {
      for (int site = 1; site <= g.num_sites; ++site) {
        const int c = g.cell(site, day, bin);
        if (static_cast<std::size_t>(c) >= fit.masked.size() || !fit.masked[c]) continue;
        if (std::isnan(fit.reference[c]) || std::isnan(fit.fitted[c])) continue;
        out.push_back({g.days[day], bin, site, fit.reference[c], fit.fitted[c]});
      }
    }
  }
  return out;
}

std::vector<BaselineValue> prior_mean_baseline(const ingest::CountFrame& frame, const Date& from,
                                               const Date& to, int history_weeks) {
  require(history_weeks >= 1, ErrorCode::InvalidInput, "history weeks must be at least 1");
  require(from <= to, ErrorCode::InvalidInput, "target range is reversed");
  using Key = std::tuple<int, int, int>;  // (serial day, bin, id)
  auto serial = [](const Date& d) {
    return static_cast<int>(std::chrono::sys_days(d).time_since_epoch().count());
  };
  std::map<Key, const ingest::CountRow*> index;
  for (const auto& r : frame.rows) index[{serial(r.date), r.time_bin, r.id}] = &r;

  std::vector<BaselineValue> out;
  for (const auto& [key, row] : index) {
    if (row->date < from || to < row->date) continue;
    BaselineValue v{row->date, row->time_bin, row->id, kNaN, 0};
    double sum = 0.0;
    for (int k = 1; k <= history_weeks; ++k) {
      const auto it = index.find({std::get<0>(key) - 7 * k, row->time_bin, row->id});
      if (it == index.end() || !it->second->sum) continue;
      sum += *it->second->sum;
      ++v.history_count;
    }
    if (v.history_count > 0) v.mean = sum / v.history_count;
    out.push_back(v);
  }
  require(!out.empty(), ErrorCode::InvalidInput,
          "target range " + format_date(from) + " to " + format_date(to) + " has no rows in the frame");
  return out;
}

Comparison compare(std::span<const KeyedValue> model_preds, std::span<const BaselineValue> baseline,
                   const ingest::CountFrame& frame) {
  require(model_preds.size() == baseline.size(), ErrorCode::InvalidInput,
          "model and baseline predictions have different lengths");
  std::map<std::tuple<Date, int, int>, const ingest::CountRow*> index;
  for (const auto& r : frame.rows) index[{r.date, r.time_bin, r.id}] = &r;

  Comparison c;
  double mean_sum = 0.0;
  double pred_sum = 0.0;
  for (std::size_t i = 0; i < model_preds.size(); ++i) {
    const KeyedValue& m = model_preds[i];
    const BaselineValue& b = baseline[i];
    require(m.date == b.date && m.time_bin == b.time_bin && m.id == b.id, ErrorCode::InvalidInput,
            "model and baseline keys differ at row " + std::to_string(i + 1));
    const auto it = index.find({m.date, m.time_bin, m.id});
    require(it != index.end(), ErrorCode::InvalidInput,
            "key " + format_date(m.date) + " bin " + std::to_string(m.time_bin) + " site " +
                std::to_string(m.id) + " is not in the frame");
    ComparisonRow row{m.date, m.time_bin, m.id, kNaN, m.value, b.mean, kNaN, kNaN};
    if (it->second->sum) row.actual = *it->second->sum;
    row.mean_pe = std::isnan(row.mean) ? kNaN : percentage_error(row.actual, row.mean);
    row.pred_pe = percentage_error(row.actual, row.pred);
    if (!std::isnan(row.mean_pe) && !std::isnan(row.pred_pe)) {
      mean_sum += row.mean_pe;
      pred_sum += row.pred_pe;
      ++c.count;
    }
    c.rows.push_back(row);
  }
  require(c.count > 0, ErrorCode::EmptyMetric, "no comparable rows");
  c.mean_mpe = mean_sum / static_cast<double>(c.count);
  c.pred_mpe = pred_sum / static_cast<double>(c.count);
  return c;
}

void write_mpe_by_site_csv(const MpeReport& report, std::ostream& out) {
  out << "ID,MPE,N\n" << std::setprecision(12);
  for (const auto& [id, g] : report.by_site) out << id << ',' << g.mpe << ',' << g.count << '\n';
}

void write_mpe_by_day_csv(const MpeReport& report, std::ostream& out) {
  out << "Day,MPE,N\n" << std::setprecision(12);
  for (const auto& [d, g] : report.by_day) out << weekday_name(d) << ',' << g.mpe << ',' << g.count << '\n';
}

void write_mpe_by_time_csv(const MpeReport& report, std::ostream& out) {
  out << "TimeBin,MPE,N\n" << std::setprecision(12);
  for (const auto& [t, g] : report.by_time) out << t << ',' << g.mpe << ',' << g.count << '\n';
}

void write_mpe_by_day_time_csv(const MpeReport& report, std::ostream& out) {
  out << "Day,TimeBin,MPE,N\n" << std::setprecision(12);
  for (const auto& [k, g] : report.by_day_time) {
    out << weekday_name(k.first) << ',' << k.second << ',' << g.mpe << ',' << g.count << '\n';
  }
}

void write_mpe_summary_csv(const MpeReport& report, std::ostream& out) {
  out << "MPE,N\n" << std::setprecision(12) << report.overall << ',' << report.count << '\n';
  for (const auto& note : report.notes) out << "# " << note << '\n';
}

void write_comparison_csv(const Comparison& comparison, std::ostream& out) {
  out << "Date,TimeBin,ID,ActualY,pred,mean,meanPE,predPE\n" << std::setprecision(12);
  for (const auto& r : comparison.rows) {
    out << format_date(r.date) << ',' << r.time_bin << ',' << r.id << ',';
    write_value(out, r.actual);
    out << ',';
    write_value(out, r.pred);
    out << ',';
    write_value(out, r.mean);
    out << ',';
    write_value(out, r.mean_pe);
    out << ',';
    write_value(out, r.pred_pe);
    out << '\n';
  }
  out << "ALL,,,,,," << comparison.mean_mpe << ',' << comparison.pred_mpe << '\n';
}

Comparison read_comparison_csv(std::istream& in) {
  std::string line;
  long line_no = 0;
  const std::vector<std::string> expected{"Date", "TimeBin", "ID", "ActualY", "pred", "mean", "meanPE", "predPE"};
  if (!std::getline(in, line) || ingest::split_csv_line(ingest::trim(line)) != expected) {
    throw ParseError("comparison CSV header must be " "Date,TimeBin,ID,ActualY,pred,mean,meanPE,predPE", 1);
  }
  ++line_no;
  auto number = [&](const std::string& s) {
    if (s.empty()) return kNaN;
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("invalid number '" + s + "'", line_no);
  };
  Comparison c;
  bool have_total = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = ingest::trim(line);
    if (t.empty()) continue;
    const auto f = ingest::split_csv_line(t);
    if (f.size() != expected.size()) throw ParseError("expected 8 fields", line_no);
    if (f[0] == "ALL") {
      c.mean_mpe = number(f[6]);
      c.pred_mpe = number(f[7]);
      have_total = true;
      continue;
    }
    ComparisonRow r;
    try {
      r.date = parse_date(f[0]);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    r.time_bin = static_cast<int>(number(f[1]));
    r.id = static_cast<int>(number(f[2]));
    r.actual = number(f[3]);
    r.pred = number(f[4]);
    r.mean = number(f[5]);
    r.mean_pe = number(f[6]);
    r.pred_pe = number(f[7]);
    if (!std::isnan(r.mean_pe) && !std::isnan(r.pred_pe)) ++c.count;
    c.rows.push_back(r);
  }
  if (!have_total) throw ParseError("comparison CSV lacks the ALL row", line_no);
  return c;
}

}  // namespace stinla::evaluate
