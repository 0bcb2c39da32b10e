#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stinla/calendar.hpp"

namespace stinla::ingest {

// One detector reading from a raw SCATS-style export.
struct RawDetectorRow {
  Date date;
  int start_minute = 0;  // start of the 30-minute interval
  int site = 0;          // original site number
  int detector = 0;
  std::optional<long> count;  // empty for "BAD"
  long line = 0;
};

// Site -> stop-line detectors retained when summing.
using KeepDetectors = std::map<int, std::set<int>>;

struct CountRow {
  Date date;
  int time_bin = 0;
  int id = 0;  // sequential site id, 1-based
  std::optional<double> sum;
  std::vector<double> covariates;
};

struct CountFrame {
  std::vector<CountRow> rows;
  std::map<int, int> id_map;  // original site -> sequential id (may be empty)
  std::vector<std::string> covariate_names;
  int bin_minutes = 30;
  int first_bin_minute = 0;

  int num_sites() const;  // largest sequential id
  long num_missing() const;
  // Rows ordered by (date, time_bin, id).
  void sort();
  // Throws if a (id, date, time_bin) key repeats or a sum is negative.
  void validate() const;
};

std::vector<RawDetectorRow> read_raw_csv(std::istream& in);
KeepDetectors read_keep_file(std::istream& in);

// Keeps the configured detectors, sums them per (site, date, interval) and
// recodes sites to 1..n in ascending original order. An interval is missing
// when any kept detector reads BAD or has no row.
CountFrame clean(const std::vector<RawDetectorRow>& raw, const KeepDetectors& keep);

struct HourWindow {
  int first_hour = 7;
  int end_hour = 19;  // exclusive
};

// Sums half-hour pairs into hour bins inside the window; bin 0 is first_hour.
// A pair with one half absent is dropped and reported in `warnings`.
CountFrame aggregate_hourly(const CountFrame& frame, std::vector<std::string>* warnings = nullptr,
                            HourWindow window = {});

std::pair<CountFrame, CountFrame> split_weekpart(const CountFrame& frame);

enum class WeekPart { All, Weekday, Weekend };
CountFrame select_weekpart(const CountFrame& frame, WeekPart part);
WeekPart parse_weekpart(const std::string& text);

struct MissingTally {
  long rows = 0;
  long missing = 0;
};

struct MissingnessReport {
  std::map<IsoWeek, MissingTally> by_week;
  std::map<int, MissingTally> by_site;
  long total_rows = 0;
  long total_missing = 0;
};

MissingnessReport missingness_report(const CountFrame& frame);
void write_missing_by_week_csv(const MissingnessReport& report, std::ostream& out);
void write_missing_by_site_csv(const MissingnessReport& report, std::ostream& out);

// CountFrame CSV: Date,TimeBin,ID,Sum[,covariates...]; empty Sum is missing.
CountFrame read_count_frame(std::istream& in);
CountFrame read_count_frame_file(const std::string& path);
void write_count_frame(const CountFrame& frame, std::ostream& out);
void write_count_frame_file(const CountFrame& frame, const std::string& path);
void write_id_map_csv(const CountFrame& frame, std::ostream& out);

// Small CSV helpers shared by the readers.
std::vector<std::string> split_csv_line(const std::string& line);
std::string trim(const std::string& s);

}  // namespace stinla::ingest
