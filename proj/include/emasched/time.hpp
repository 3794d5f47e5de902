#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace emasched {

/// Whole seconds since the Unix epoch (UTC).
struct Timestamp {
  std::int64_t seconds = 0;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t s) : seconds(s) {}

  constexpr auto operator<=>(const Timestamp&) const = default;

  constexpr Timestamp plus_minutes(std::int64_t m) const { return Timestamp{seconds + 60 * m}; }
  constexpr Timestamp plus_seconds(std::int64_t s) const { return Timestamp{seconds + s}; }
};

constexpr std::int64_t kSecondsPerMinute = 60;
constexpr std::int64_t kSecondsPerDay = 86400;

enum class TimestampFormat { Epoch, Iso8601 };

TimestampFormat parse_timestamp_format(std::string_view name);
std::string to_string(TimestampFormat f);

/// Parses "2024-03-04T08:15:00", with optional "Z" or "+HH:MM"/"-HH:MM" suffix.
/// A missing offset means UTC.
Timestamp parse_iso8601(std::string_view text);
/// Always emits UTC with a trailing "Z".
std::string format_iso8601(Timestamp t);

Timestamp parse_timestamp(std::string_view text, TimestampFormat fmt);
std::string format_timestamp(Timestamp t, TimestampFormat fmt);

/// Days since 1970-01-01 of the participant-local calendar date.
std::int64_t local_day_number(Timestamp t, int utc_offset_minutes);
/// Seconds since participant-local midnight.
std::int64_t local_seconds_of_day(Timestamp t, int utc_offset_minutes);
/// UTC instant of participant-local midnight for a local day number.
Timestamp local_midnight(std::int64_t local_day, int utc_offset_minutes);

/// Parses "YYYY-MM-DD" into a day number.
std::int64_t parse_date(std::string_view text);
std::string format_date(std::int64_t day_number);

}  // namespace emasched
