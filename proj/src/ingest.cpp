#include "stinla/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "stinla/error.hpp"

namespace stinla::ingest {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

Date parse_date_at(const std::string& s, long line) {
  try {
    return parse_date(s);
  } catch (const Error& e) {
    throw ParseError(e.what(), line);
  }
}

struct Header {
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;

  std::size_t need(const std::string& name, long line) const {
    const auto it = index.find(lower(name));
    if (it == index.end()) throw ParseError("missing column '" + name + "'", line);
    return it->second;
  }
};

Header read_header(std::istream& in, long& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Header h;
    h.names = split_csv_line(trim(line));
    for (std::size_t i = 0; i < h.names.size(); ++i) h.index[lower(h.names[i])] = i;
    return h;
  }
  throw ParseError("empty file: no header", line_no);
}

int parse_clock(const std::string& s, long line) {
  const auto colon = s.find(':');
  int h = -1;
  int m = -1;
  if (colon == std::string::npos || !parse_number(s.substr(0, colon), h) ||
      !parse_number(s.substr(colon + 1), m) || h < 0 || h > 24 || m < 0 || m > 59 ||
      (h == 24 && m != 0)) {
    throw ParseError("malformed time '" + s + "'", line);
  }
  return h * 60 + m;
}

int parse_interval(const std::string& label, long line) {
  const auto dash = label.find('-');
  if (dash == std::string::npos) throw ParseError("malformed interval label '" + label + "'", line);
  const int start = parse_clock(trim(label.substr(0, dash)), line);
  int end = parse_clock(trim(label.substr(dash + 1)), line);
  if (end == 0 && start == 23 * 60 + 30) end = 24 * 60;
  if (start % 30 != 0 || end - start != 30 || start >= 24 * 60) {
    throw ParseError("interval label '" + label + "' is not a 30-minute interval", line);
  }
  return start;
}

}  // namespace

int CountFrame::num_sites() const {
  int n = 0;
  for (const auto& r : rows) n = std::max(n, r.id);
  return n;
}

long CountFrame::num_missing() const {
  return static_cast<long>(std::count_if(rows.begin(), rows.end(),
                                         [](const CountRow& r) { return !r.sum.has_value(); }));
}

void CountFrame::sort() {
  std::stable_sort(rows.begin(), rows.end(), [](const CountRow& a, const CountRow& b) {
    return std::tie(a.date, a.time_bin, a.id) < std::tie(b.date, b.time_bin, b.id);
  });
}

void CountFrame::validate() const {
  std::vector<std::tuple<Date, int, int>> keys;
  keys.reserve(rows.size());
  for (const auto& r : rows) {
    require(r.id >= 1, ErrorCode::InvalidInput, "site id must be positive");
    require(r.time_bin >= 0, ErrorCode::InvalidInput, "time bin must be non-negative");
    require(!r.sum || *r.sum >= 0.0, ErrorCode::InvalidInput, "negative count");
    require(r.covariates.size() == covariate_names.size(), ErrorCode::InvalidInput,
            "covariate count mismatch");
    keys.emplace_back(r.date, r.time_bin, r.id);
  }
  std::sort(keys.begin(), keys.end());
  const auto dup = std::adjacent_find(keys.begin(), keys.end());
  if (dup != keys.end()) {
    fail(ErrorCode::DuplicateRow, "duplicate row for site " + std::to_string(std::get<2>(*dup)) +
                                      " on " + format_date(std::get<0>(*dup)) + " bin " +
                                      std::to_string(std::get<1>(*dup)));
  }
}

std::vector<RawDetectorRow> read_raw_csv(std::istream& in) {
  long line_no = 0;
  const Header h = read_header(in, line_no);
  const std::size_t c_date = h.need("Date", line_no);
  const std::size_t c_time = h.need("Time", line_no);
  const std::size_t c_site = h.need("Site", line_no);
  const std::size_t c_det = h.need("Detector", line_no);
  const std::size_t c_count = h.need("Count", line_no);
  const std::size_t width = std::max({c_date, c_time, c_site, c_det, c_count}) + 1;

  std::vector<RawDetectorRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < width) throw ParseError("expected " + std::to_string(width) + " fields", line_no);
    RawDetectorRow r;
    r.line = line_no;
    r.date = parse_date_at(f[c_date], line_no);
    r.start_minute = parse_interval(f[c_time], line_no);
    if (!parse_number(f[c_site], r.site)) throw ParseError("invalid site '" + f[c_site] + "'", line_no);
    if (!parse_number(f[c_det], r.detector)) {
      throw ParseError("invalid detector '" + f[c_det] + "'", line_no);
    }
    if (lower(f[c_count]) != "bad") {
      long v = 0;
      if (!parse_number(f[c_count], v) || v < 0) {
        throw ParseError("count must be a non-negative integer or BAD, got '" + f[c_count] + "'",
                         line_no);
      }
      r.count = v;
    }
    rows.push_back(r);
  }
  return rows;
}

KeepDetectors read_keep_file(std::istream& in) {
  KeepDetectors keep;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto colon = line.find(':');
    int site = 0;
    if (colon == std::string::npos || !parse_number(trim(line.substr(0, colon)), site)) {
      throw ParseError("expected 'site: d1 d2 ...'", line_no);
    }
    std::istringstream ss(line.substr(colon + 1));
    std::string tok;
    auto& set = keep[site];
    while (ss >> tok) {
      int d = 0;
      if (!parse_number(tok, d)) throw ParseError("invalid detector '" + tok + "'", line_no);
      set.insert(d);
    }
    if (set.empty()) throw ParseError("site " + std::to_string(site) + " keeps no detectors", line_no);
  }
  return keep;
}

CountFrame clean(const std::vector<RawDetectorRow>& raw, const KeepDetectors& keep) {
  require(!keep.empty(), ErrorCode::InvalidInput, "keep-detectors map is empty");
  using Key = std::tuple<int, Date, int>;  // site, date, start minute
  std::map<Key, std::map<int, const RawDetectorRow*>> groups;
  for (const auto& r : raw) {
    const auto it = keep.find(r.site);
    if (it == keep.end() || !it->second.contains(r.detector)) continue;
    auto& slot = groups[Key{r.site, r.date, r.start_minute}];
    const auto [pos, inserted] = slot.emplace(r.detector, &r);
    if (!inserted) {
      fail(ErrorCode::DuplicateRow,
           "line " + std::to_string(r.line) + ": duplicate reading for site " +
               std::to_string(r.site) + " detector " + std::to_string(r.detector) + " on " +
               format_date(r.date) + " (first seen on line " + std::to_string(pos->second->line) +
               ")");
    }
  }

  CountFrame out;
  out.bin_minutes = 30;
  out.first_bin_minute = 0;
  for (const auto& [key, readings] : groups) out.id_map.emplace(std::get<0>(key), 0);
  int next_id = 1;
  for (auto& [site, id] : out.id_map) id = next_id++;

  out.rows.reserve(groups.size());
  for (const auto& [key, readings] : groups) {
    const auto& [site, date, start] = key;
    const auto& kept = keep.at(site);
    std::optional<double> sum = 0.0;
    for (int d : kept) {
      const auto it = readings.find(d);
      if (it == readings.end() || !it->second->count) {
        sum.reset();
        break;
      }
      *sum += static_cast<double>(*it->second->count);
    }
    out.rows.push_back(CountRow{date, start / 30, out.id_map.at(site), sum, {}});
  }
  out.sort();
  return out;
}

CountFrame aggregate_hourly(const CountFrame& frame, std::vector<std::string>* warnings,
                            HourWindow window) {
  require(frame.bin_minutes == 30, ErrorCode::InvalidInput,
          "hourly aggregation needs 30-minute bins");
  require(window.first_hour >= 0 && window.end_hour <= 24 && window.first_hour < window.end_hour,
          ErrorCode::InvalidInput, "invalid hour window");
  std::map<std::tuple<int, Date, int>, const CountRow*> index;
  for (const auto& r : frame.rows) index[{r.id, r.date, r.time_bin}] = &r;
  std::set<std::pair<int, Date>> days;
  for (const auto& r : frame.rows) days.emplace(r.id, r.date);

  CountFrame out;
  out.id_map = frame.id_map;
  out.covariate_names = frame.covariate_names;
  out.bin_minutes = 60;
  out.first_bin_minute = window.first_hour * 60;
  for (const auto& [id, date] : days) {
    for (int h = window.first_hour; h < window.end_hour; ++h) {
      const int first = (h * 60 - frame.first_bin_minute) / 30;
      const auto a = index.find({id, date, first});
      const auto b = index.find({id, date, first + 1});
      const bool has_a = a != index.end();
      const bool has_b = b != index.end();
      if (!has_a && !has_b) continue;
      if (!has_a || !has_b) {
        if (warnings) {
          warnings->push_back("site " + std::to_string(id) + " " + format_date(date) + " hour " +
                              std::to_string(h) + ": only one half-hour present, bin dropped");
        }
        continue;
      }
      CountRow row{date, h - window.first_hour, id, std::nullopt, {}};
      if (a->second->sum && b->second->sum) row.sum = *a->second->sum + *b->second->sum;
      row.covariates.resize(frame.covariate_names.size());
      for (std::size_t c = 0; c < row.covariates.size(); ++c) {
        row.covariates[c] = 0.5 * (a->second->covariates[c] + b->second->covariates[c]);
      }
      out.rows.push_back(std::move(row));
    }
  }
  out.sort();
  return out;
}

std::pair<CountFrame, CountFrame> split_weekpart(const CountFrame& frame) {
  CountFrame weekday;
  CountFrame weekend;
  for (CountFrame* f : {&weekday, &weekend}) {
    f->id_map = frame.id_map;
    f->covariate_names = frame.covariate_names;
    f->bin_minutes = frame.bin_minutes;
    f->first_bin_minute = frame.first_bin_minute;
  }
  for (const auto& r : frame.rows) (is_weekend(r.date) ? weekend : weekday).rows.push_back(r);
  return {std::move(weekday), std::move(weekend)};
}

CountFrame select_weekpart(const CountFrame& frame, WeekPart part) {
  if (part == WeekPart::All) return frame;
  auto [weekday, weekend] = split_weekpart(frame);
  return part == WeekPart::Weekday ? std::move(weekday) : std::move(weekend);
}

WeekPart parse_weekpart(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "all") return WeekPart::All;
  if (t == "weekday" || t == "weekdays") return WeekPart::Weekday;
  if (t == "weekend" || t == "weekends") return WeekPart::Weekend;
  fail(ErrorCode::InvalidInput, "weekpart must be weekday, weekend or all, got '" + text + "'");
}

MissingnessReport missingness_report(const CountFrame& frame) {
  MissingnessReport rep;
  for (const auto& r : frame.rows) {
    const bool missing = !r.sum.has_value();
    auto& w = rep.by_week[iso_week(r.date)];
    auto& s = rep.by_site[r.id];
    ++w.rows;
    ++s.rows;
    ++rep.total_rows;
    if (missing) {
      ++w.missing;
      ++s.missing;
      ++rep.total_missing;
    }
  }
  return rep;
}

void write_missing_by_week_csv(const MissingnessReport& report, std::ostream& out) {
  out << "Week,Rows,Missing\n";
  for (const auto& [week, t] : report.by_week) {
    out << format_iso_week(week) << ',' << t.rows << ',' << t.missing << '\n';
  }
}

void write_missing_by_site_csv(const MissingnessReport& report, std::ostream& out) {
  out << "ID,Rows,Missing\n";
  for (const auto& [id, t] : report.by_site) out << id << ',' << t.rows << ',' << t.missing << '\n';
}

CountFrame read_count_frame(std::istream& in) {
  long line_no = 0;
  const Header h = read_header(in, line_no);
  const std::size_t c_date = h.need("Date", line_no);
  const std::size_t c_bin = h.need("TimeBin", line_no);
  const std::size_t c_id = h.need("ID", line_no);
  const std::size_t c_sum = h.need("Sum", line_no);
  CountFrame frame;
  std::vector<std::size_t> cov_cols;
  for (std::size_t i = 0; i < h.names.size(); ++i) {
    if (i != c_date && i != c_bin && i != c_id && i != c_sum) {
      cov_cols.push_back(i);
      frame.covariate_names.push_back(h.names[i]);
    }
  }
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != h.names.size()) {
      throw ParseError("expected " + std::to_string(h.names.size()) + " fields, got " +
                           std::to_string(f.size()),
                       line_no);
    }
    CountRow r;
    r.date = parse_date_at(f[c_date], line_no);
    if (!parse_number(f[c_bin], r.time_bin) || r.time_bin < 0) {
      throw ParseError("invalid TimeBin '" + f[c_bin] + "'", line_no);
    }
    if (!parse_number(f[c_id], r.id) || r.id < 1) throw ParseError("invalid ID '" + f[c_id] + "'", line_no);
    if (!f[c_sum].empty() && lower(f[c_sum]) != "na") {
      double v = 0.0;
      if (!parse_number(f[c_sum], v) || v < 0.0) {
        throw ParseError("invalid Sum '" + f[c_sum] + "'", line_no);
      }
      r.sum = v;
    }
    for (std::size_t c : cov_cols) {
      double v = 0.0;
      if (!parse_number(f[c], v)) {
        throw ParseError("covariate '" + h.names[c] + "' must be numeric, got '" + f[c] + "'",
                         line_no);
      }
      r.covariates.push_back(v);
    }
    frame.rows.push_back(std::move(r));
  }
  frame.validate();
  frame.sort();
  return frame;
}

CountFrame read_count_frame_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open count file '" + path + "'");
  return read_count_frame(in);
}

void write_count_frame(const CountFrame& frame, std::ostream& out) {
  out << "Date,TimeBin,ID,Sum";
  for (const auto& n : frame.covariate_names) out << ',' << n;
  out << '\n';
  out << std::setprecision(17);
  for (const auto& r : frame.rows) {
    out << format_date(r.date) << ',' << r.time_bin << ',' << r.id << ',';
    if (r.sum) out << *r.sum;
    for (double c : r.covariates) out << ',' << c;
    out << '\n';
  }
}

void write_count_frame_file(const CountFrame& frame, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write count file '" + path + "'");
  write_count_frame(frame, out);
}

void write_id_map_csv(const CountFrame& frame, std::ostream& out) {
  out << "Site,ID\n";
  for (const auto& [site, id] : frame.id_map) out << site << ',' << id << '\n';
}

}  // namespace stinla::ingest
