#include "emasched/time.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace emasched {

namespace {

int parse_fixed(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
  if (pos + len > s.size()) throw std::invalid_argument("truncated timestamp: '" + std::string(whole) + "'");
  int v = 0;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc{} || p != s.data() + pos + len)
    throw std::invalid_argument("bad digits in timestamp: '" + std::string(whole) + "'");
  return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count();
}

}  // namespace

TimestampFormat parse_timestamp_format(std::string_view name) {
  if (name == "epoch") return TimestampFormat::Epoch;
  if (name == "iso8601") return TimestampFormat::Iso8601;
  throw std::invalid_argument("unknown timestamp format '" + std::string(name) + "' (expected epoch|iso8601)");
}

std::string to_string(TimestampFormat f) { return f == TimestampFormat::Epoch ? "epoch" : "iso8601"; }

Timestamp parse_iso8601(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':')
    throw std::invalid_argument("not an ISO-8601 timestamp: '" + std::string(text) + "'");
  const int y = parse_fixed(text, 0, 4, text);
  const int mo = parse_fixed(text, 5, 2, text);
  const int d = parse_fixed(text, 8, 2, text);
  const int h = parse_fixed(text, 11, 2, text);
  const int mi = parse_fixed(text, 14, 2, text);
  const int s = parse_fixed(text, 17, 2, text);
  if (h > 23 || mi > 59 || s > 59) throw std::invalid_argument("time out of range: '" + std::string(text) + "'");
  std::int64_t secs = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * kSecondsPerDay +
                      h * 3600 + mi * 60 + s;
  std::string_view rest = text.substr(19);
  if (rest.empty() || rest == "Z") return Timestamp{secs};
  if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    const int oh = parse_fixed(rest, 1, 2, text);
    const int om = parse_fixed(rest, 4, 2, text);
    const int sign = rest[0] == '+' ? 1 : -1;
    return Timestamp{secs - sign * (oh * 3600 + om * 60)};
  }
  throw std::invalid_argument("bad ISO-8601 offset: '" + std::string(text) + "'");
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const std::int64_t day = floor_div(t.seconds, kSecondsPerDay);
  const std::int64_t sod = t.seconds - day * kSecondsPerDay;
  year_month_day ymd{sys_days{days{day}}};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(sod / 3600), static_cast<long long>((sod / 60) % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

Timestamp parse_timestamp(std::string_view text, TimestampFormat fmt) {
  if (fmt == TimestampFormat::Iso8601) return parse_iso8601(text);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw std::invalid_argument("not an epoch-seconds timestamp: '" + std::string(text) + "'");
  return Timestamp{v};
}

std::string format_timestamp(Timestamp t, TimestampFormat fmt) {
  return fmt == TimestampFormat::Iso8601 ? format_iso8601(t) : std::to_string(t.seconds);
}

std::int64_t local_day_number(Timestamp t, int utc_offset_minutes) {
  return floor_div(t.seconds + std::int64_t{utc_offset_minutes} * 60, kSecondsPerDay);
}

std::int64_t local_seconds_of_day(Timestamp t, int utc_offset_minutes) {
  const std::int64_t local = t.seconds + std::int64_t{utc_offset_minutes} * 60;
  return local - floor_div(local, kSecondsPerDay) * kSecondsPerDay;
}

Timestamp local_midnight(std::int64_t local_day, int utc_offset_minutes) {
  return Timestamp{local_day * kSecondsPerDay - std::int64_t{utc_offset_minutes} * 60};
}

std::int64_t parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  return days_from_civil(parse_fixed(text, 0, 4, text), static_cast<unsigned>(parse_fixed(text, 5, 2, text)),
                         static_cast<unsigned>(parse_fixed(text, 8, 2, text)));
}

std::string format_date(std::int64_t day_number) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{day_number}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace emasched
