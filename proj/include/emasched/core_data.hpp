#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emasched/time.hpp"

namespace emasched {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

inline constexpr int kAllowedWidths[] = {10, 15, 20, 30, 60};
bool is_allowed_width(int minutes);

struct SchemaConfig {
  int schema_version = 1;
  std::vector<std::string> channels;  // channel registry
  double pa_min = 5.0;
  double pa_max = 25.0;
  int utc_offset_minutes = 0;
  std::map<std::string, int> participant_utc_offsets;  // overrides by participant id
  int segment_width_minutes = 30;
  int daily_prompts = 5;
  TimestampFormat timestamp_format = TimestampFormat::Epoch;
  bool include_partial_segments = true;

  int offset_for(std::string_view participant_id) const;
  int channel_index(std::string_view name) const;  // -1 when absent

  bool operator==(const SchemaConfig&) const = default;
};

/// Throws with a "field: reason" message on schema violations.
SchemaConfig parse_schema(std::string_view json_text);
std::string schema_to_json(const SchemaConfig& schema);
SchemaConfig load_schema(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Streams
// ---------------------------------------------------------------------------

struct SensorSample {
  Timestamp timestamp;
  std::string channel;
  double value = 0.0;
};

/// One channel's samples in time order.
struct SensorStream {
  std::vector<Timestamp> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
  bool operator==(const SensorStream&) const = default;
};

struct EmaEvent {
  Timestamp notification_time;
  std::optional<Timestamp> response_time;
  std::optional<double> pa_score;
  double scale_min = 5.0;
  double scale_max = 25.0;

  bool responded() const { return response_time.has_value(); }
  bool operator==(const EmaEvent&) const = default;
};

inline constexpr int kResponseWindowMinutes = 60;

/// Throws std::invalid_argument describing the violated invariant.
void validate_event(const EmaEvent& e);

/// Inter-beat intervals. Beat times are fractional epoch seconds.
struct RrSeries {
  std::vector<double> times;
  std::vector<double> rr_ms;

  std::size_t size() const { return rr_ms.size(); }
  bool empty() const { return rr_ms.empty(); }
  bool operator==(const RrSeries&) const = default;
};

enum class PhoneEventKind { CallIn, CallOut, CallMissed, SmsIn, SmsOut, ScreenUnlock, ScreenLock };
std::string to_string(PhoneEventKind k);
PhoneEventKind parse_phone_event_kind(std::string_view s);

struct PhoneEvent {
  Timestamp time;
  PhoneEventKind kind = PhoneEventKind::CallIn;
  double duration_s = 0.0;  // calls only
  bool operator==(const PhoneEvent&) const = default;
};

enum class SleepState { Asleep, Awake, OutOfBed };
std::string to_string(SleepState s);
SleepState parse_sleep_state(std::string_view s);

/// [start, end) spent in one sleep state.
struct SleepInterval {
  Timestamp start;
  Timestamp end;
  SleepState state = SleepState::Asleep;
  bool operator==(const SleepInterval&) const = default;
};

struct LocationSample {
  Timestamp time;
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LocationSample&) const = default;
};

struct ParticipantDataset {
  std::string id;
  int utc_offset_minutes = 0;
  std::vector<SensorStream> streams;  // parallel to SchemaConfig::channels
  std::vector<EmaEvent> events;       // sorted by notification_time
  RrSeries rr;
  std::vector<PhoneEvent> phone;
  std::vector<SleepInterval> sleep;
  std::vector<LocationSample> locations;
  std::int64_t first_local_day = 0;  // local day number of study day 1

  /// 1-based study day of an instant.
  int study_day(Timestamp t) const;
  int num_study_days() const;

  bool operator==(const ParticipantDataset&) const = default;
};

struct Cohort {
  SchemaConfig schema;
  std::vector<ParticipantDataset> participants;

  const ParticipantDataset& participant(std::string_view id) const;
  bool operator==(const Cohort&) const = default;
};

struct IngestReport {
  struct Counts {
    std::string participant;
    std::size_t sensor_rows = 0;
    std::size_t ema_rows = 0;
    std::size_t rr_rows = 0;
    std::size_t phone_rows = 0;
    std::size_t sleep_rows = 0;
    std::size_t location_rows = 0;
  };
  std::vector<Counts> per_participant;
};

/// Reads one sub-directory per participant (sorted by name). `sensors.csv` and
/// `ema.csv` are required; `rr.csv`, `phone.csv`, `sleep.csv`, `location.csv`
/// are optional.
Cohort ingest(const std::filesystem::path& dir, const SchemaConfig& schema, IngestReport* report = nullptr);

/// Inverse of ingest: writes `schema.json` plus one directory per participant.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

/// Recomputes first_local_day, sorts streams and validates invariants.
void finalize_participant(ParticipantDataset& p, const SchemaConfig& schema);

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

struct Segment {
  std::string participant_id;
  Timestamp start;
  int width_minutes = 30;
  int study_day = 1;
  std::size_t sample_count = 0;
  double coverage = 0.0;  // fraction of the window's minutes holding >= 1 sample

  Timestamp end() const { return start.plus_minutes(width_minutes); }
  bool empty() const { return sample_count == 0; }
  bool partial() const { return coverage < 1.0; }
  bool contains(Timestamp t) const { return start <= t && t < end(); }
};

/// Grid anchored at participant-local midnight, spanning the observed sensor range.
/// Throws std::invalid_argument for widths outside {10, 15, 20, 30, 60}.
std::vector<Segment> segment_windows(const ParticipantDataset& participant, int width_minutes);

// ---------------------------------------------------------------------------
// Feature table and semi-personalized normalization
// ---------------------------------------------------------------------------

/// Rows are segments, columns follow the feature registry. Masked cells are NaN.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<Segment> segments;
  Eigen::MatrixXd values;

  std::size_t rows() const { return segments.size(); }
  std::size_t cols() const { return names.size(); }
  /// Hash of the ordered registry, stored with trained models.
  std::string registry_hash() const;
};

std::string registry_hash(std::span<const std::string> names);

struct FeatureBounds {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> fill;  // normalized reference mean, used for masked cells
};

enum class AbsentFeaturePolicy { Error, FallbackToOthers };

/// Rows whose bounds define the scale for `test_participant` on `study_day`:
/// other participants' rows on day 1, the participant's earlier days afterwards.
std::vector<std::size_t> reference_rows(const FeatureTable& table, std::string_view test_participant,
                                        int study_day);

FeatureBounds compute_bounds(const FeatureTable& table, std::span<const std::size_t> rows,
                             AbsentFeaturePolicy policy = AbsentFeaturePolicy::Error,
                             std::span<const std::size_t> fallback_rows = {});

/// Min-max scaling with clipping to [0, 1]; constant features map to 0.5 and
/// masked cells become the reference fill value.
Eigen::MatrixXd apply_bounds(const Eigen::MatrixXd& values, const FeatureBounds& bounds);
Eigen::RowVectorXd apply_bounds_row(const Eigen::RowVectorXd& row, const FeatureBounds& bounds);

struct NormalizedFeatures {
  Eigen::MatrixXd values;
  FeatureBounds bounds;
};

NormalizedFeatures normalize_semi_personalized(const FeatureTable& table, std::string_view test_participant,
                                               int study_day,
                                               AbsentFeaturePolicy policy = AbsentFeaturePolicy::Error);

}  // namespace emasched
