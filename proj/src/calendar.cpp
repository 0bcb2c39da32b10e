#include "stinla/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "stinla/error.hpp"

namespace stinla {

namespace {

int to_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::Parse, "invalid date '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  int y = 0;
  int m = 0;
  int d = 0;
  if (const auto dash1 = text.find('-'); dash1 != std::string_view::npos) {
    const auto dash2 = text.find('-', dash1 + 1);
    if (dash2 == std::string_view::npos) fail(ErrorCode::Parse, "invalid date '" + std::string(text) + "'");
    y = to_int(text.substr(0, dash1), text);
    m = to_int(text.substr(dash1 + 1, dash2 - dash1 - 1), text);
    d = to_int(text.substr(dash2 + 1), text);
  } else if (const auto slash1 = text.find('/'); slash1 != std::string_view::npos) {
    const auto slash2 = text.find('/', slash1 + 1);
    if (slash2 == std::string_view::npos) fail(ErrorCode::Parse, "invalid date '" + std::string(text) + "'");
    d = to_int(text.substr(0, slash1), text);
    m = to_int(text.substr(slash1 + 1, slash2 - slash1 - 1), text);
    const auto year_text = text.substr(slash2 + 1);
    y = to_int(year_text, text);
    if (year_text.size() <= 2) y += 2000;
  } else {
    fail(ErrorCode::Parse, "invalid date '" + std::string(text) + "'");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) fail(ErrorCode::Parse, "invalid date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

int weekday_index(const Date& d) {
  return static_cast<int>(std::chrono::weekday{std::chrono::sys_days{d}}.iso_encoding()) - 1;
}

bool is_weekend(const Date& d) { return weekday_index(d) >= 5; }

const char* weekday_name(int index) {
  static constexpr const char* names[] = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                          "Friday", "Saturday", "Sunday"};
  return index >= 0 && index < 7 ? names[index] : "?";
}

IsoWeek iso_week(const Date& d) {
  using namespace std::chrono;
  const sys_days day{d};
  // The Thursday of this week decides the ISO year.
  const sys_days thursday = day + days{3 - weekday_index(d)};
  const year_month_day thu{thursday};
  const sys_days jan1{thu.year() / January / 1};
  return {static_cast<int>(thu.year()), static_cast<int>((thursday - jan1).count() / 7 + 1)};
}

std::string format_iso_week(const IsoWeek& w) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-W%02d", w.year, w.week);
  return buf;
}

Date add_days(const Date& d, int n) {
  return Date{std::chrono::sys_days{d} + std::chrono::days{n}};
}

int days_between(const Date& from, const Date& to) {
  return static_cast<int>((std::chrono::sys_days{to} - std::chrono::sys_days{from}).count());
}

}  // namespace stinla
