#include "evload/timeutil.hpp"

#include <charconv>
#include <cstdio>

namespace evload {
namespace {

bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len,
                     int& out) {
  if (pos + len > text.size()) return false;
  const char* first = text.data() + pos;
  const char* last = first + len;
  for (const char* p = first; p != last; ++p) {
    if (*p < '0' || *p > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::optional<Date> parse_date_at(std::string_view text, std::size_t pos) {
  int y = 0, m = 0, d = 0;
  if (!parse_fixed_int(text, pos, 4, y)) return std::nullopt;
  if (pos + 4 >= text.size() || text[pos + 4] != '-') return std::nullopt;
  if (!parse_fixed_int(text, pos + 5, 2, m)) return std::nullopt;
  if (pos + 7 >= text.size() || text[pos + 7] != '-') return std::nullopt;
  if (!parse_fixed_int(text, pos + 8, 2, d)) return std::nullopt;
  const Date ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                 std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

}  // namespace

std::optional<TimePoint> parse_timestamp(std::string_view text) {
  // "YYYY-MM-DD?HH:MM" is 16 chars; ":SS" adds 3 more.
  if (text.size() != 16 && text.size() != 19) return std::nullopt;
  const auto date = parse_date_at(text, 0);
  if (!date) return std::nullopt;
  const char sep = text[10];
  if (sep != 'T' && sep != ' ') return std::nullopt;
  int hh = 0, mm = 0;
  if (!parse_fixed_int(text, 11, 2, hh)) return std::nullopt;
  if (text[13] != ':') return std::nullopt;
  if (!parse_fixed_int(text, 14, 2, mm)) return std::nullopt;
  if (hh > 23 || mm > 59) return std::nullopt;
  if (text.size() == 19) {
    int ss = 0;
    if (text[16] != ':') return std::nullopt;
    if (!parse_fixed_int(text, 17, 2, ss)) return std::nullopt;
    if (ss != 0) return std::nullopt;
  }
  const auto days = std::chrono::sys_days{*date};
  return TimePoint{days} + std::chrono::hours{hh} + std::chrono::minutes{mm};
}

std::string format_timestamp(TimePoint tp) {
  const auto days = std::chrono::floor<std::chrono::days>(tp);
  const Date ymd{days};
  const auto tod = std::chrono::hh_mm_ss{tp - days};
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d",
                int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                int(tod.hours().count()), int(tod.minutes().count()));
  return buf;
}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10) return std::nullopt;
  return parse_date_at(text, 0);
}

std::string format_date(const Date& d) {
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(d.year()),
                unsigned(d.month()), unsigned(d.day()));
  return buf;
}

Date date_of(TimePoint tp) {
  return Date{std::chrono::floor<std::chrono::days>(tp)};
}

}  // namespace evload
