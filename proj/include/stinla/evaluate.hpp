#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stinla/calendar.hpp"
#include "stinla/ingest.hpp"
#include "stinla/model.hpp"

namespace stinla::evaluate {

// Absolute percentage error |y - yhat| / y * 100; NaN when y is missing or 0.
double percentage_error(double observed, double predicted);

// Mean percentage error over pairs whose observation is present and nonzero.
double mpe(std::span<const double> observed, std::span<const double> predicted);

// A value attached to a (date, bin, site) key.
struct KeyedValue {
  Date date;
  int time_bin = 0;
  int id = 0;
  double value = 0.0;
};

struct ScoredCell {
  Date date;
  int time_bin = 0;
  int id = 0;
  double observed = 0.0;
  double predicted = 0.0;
};

struct GroupMpe {
  double mpe = 0.0;
  long count = 0;
};

struct MpeReport {
  double overall = 0.0;
  long count = 0;
  std::map<int, GroupMpe> by_site;
  std::map<int, GroupMpe> by_day;  // weekday, 0 = Monday
  std::map<int, GroupMpe> by_time;
  std::map<std::pair<int, int>, GroupMpe> by_day_time;
  std::vector<std::string> notes;  // groups omitted for lack of scorable cells
};

MpeReport grouped_mpe(std::span<const ScoredCell> cells);

// Masked cells with a known reference value, in grid order.
std::vector<ScoredCell> masked_cells(const model::FitResult& fit);

struct BaselineValue {
  Date date;
  int time_bin = 0;
  int id = 0;
  double mean = 0.0;  // NaN when no history cell was observed
  int history_count = 0;
};

// Mean of the same (site, weekday, bin) over the history_weeks weeks before
// each target row in [from, to].
std::vector<BaselineValue> prior_mean_baseline(const ingest::CountFrame& frame, const Date& from,
                                               const Date& to, int history_weeks);

struct ComparisonRow {
  Date date;
  int time_bin = 0;
  int id = 0;
  double actual = 0.0;
  double pred = 0.0;
  double mean = 0.0;
  double mean_pe = 0.0;
  double pred_pe = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  // Averages over rows where both errors are defined.
  double mean_mpe = 0.0;
  double pred_mpe = 0.0;
  long count = 0;
};

// Keys of model and baseline must agree in order; actual values come from frame.
Comparison compare(std::span<const KeyedValue> model_preds, std::span<const BaselineValue> baseline,
                   const ingest::CountFrame& frame);

void write_mpe_by_site_csv(const MpeReport& report, std::ostream& out);
void write_mpe_by_day_csv(const MpeReport& report, std::ostream& out);
void write_mpe_by_time_csv(const MpeReport& report, std::ostream& out);
void write_mpe_by_day_time_csv(const MpeReport& report, std::ostream& out);
void write_mpe_summary_csv(const MpeReport& report, std::ostream& out);
// Date,TimeBin,ID,ActualY,pred,mean,meanPE,predPE with a closing "ALL" row.
void write_comparison_csv(const Comparison& comparison, std::ostream& out);
Comparison read_comparison_csv(std::istream& in);

}  // namespace stinla::evaluate
