#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace evload {

// Timestamps are naive local time at minute resolution. No time zone
// handling: the data is recorded in a single local clock.
using TimePoint = std::chrono::sys_time<std::chrono::minutes>;
using Date = std::chrono::year_month_day;

// Accepts "YYYY-MM-DD HH:MM" or "YYYY-MM-DDTHH:MM", with an optional ":SS"
// whose seconds must be zero. Returns nullopt on anything else.
std::optional<TimePoint> parse_timestamp(std::string_view text);

// "YYYY-MM-DDTHH:MM"
std::string format_timestamp(TimePoint tp);

// "YYYY-MM-DD"
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& d);

Date date_of(TimePoint tp);

}  // namespace evload
