#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace wtad {

using Instant = std::chrono::sys_seconds;

/// SCADA records are ten-minute averages.
inline constexpr std::chrono::seconds kSampleInterval{600};

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return res.ec == std::errc{};
}

}  // namespace detail

/// Parses `YYYY-MM-DDThh:mm:ssZ` or a bare `YYYY-MM-DD` (midnight UTC).
inline std::optional<Instant> parse_instant(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (!detail::parse_fixed(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
      !detail::parse_fixed(s, 5, 2, mo) || !detail::parse_fixed(s, 8, 2, d))
    return std::nullopt;
  if (s.size() != 10) {
    if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z' ||
        !detail::parse_fixed(s, 11, 2, h) || !detail::parse_fixed(s, 14, 2, mi) ||
        !detail::parse_fixed(s, 17, 2, se))
      return std::nullopt;
    if (h > 23 || mi > 59 || se > 59) return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Instant{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{se};
}

inline std::string format_instant(Instant t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss<seconds> hms{t - day_start};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline bool on_sample_grid(Instant t) {
  return t.time_since_epoch().count() % kSampleInterval.count() == 0;
}

/// Calendar-month shift; the day is clamped to the target month's last day.
inline Instant add_months(Instant t, int months) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  year_month_day ymd{day_start};
  year_month shifted = year_month{ymd.year(), ymd.month()} + std::chrono::months{months};
  auto last = year_month_day_last{shifted.year(), month_day_last{shifted.month()}}.day();
  const day d = ymd.day() > last ? last : ymd.day();
  return Instant{sys_days{year_month_day{shifted.year(), shifted.month(), d}}} + (t - day_start);
}

inline double days_between(Instant from, Instant to) {
  return static_cast<double>((to - from).count()) / 86400.0;
}

}  // namespace wtad
