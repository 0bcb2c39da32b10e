#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace stinla {

using Date = std::chrono::year_month_day;

// Accepts ISO YYYY-MM-DD and D/M/YY or D/M/YYYY (two-digit years are 20YY).
// Throws Error(Parse) on anything else.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

// 0 = Monday ... 6 = Sunday.
int weekday_index(const Date& d);
bool is_weekend(const Date& d);
const char* weekday_name(int index);

struct IsoWeek {
  int year;
  int week;
  auto operator<=>(const IsoWeek&) const = default;
};
IsoWeek iso_week(const Date& d);
std::string format_iso_week(const IsoWeek& w);

Date add_days(const Date& d, int days);
int days_between(const Date& from, const Date& to);

}  // namespace stinla
