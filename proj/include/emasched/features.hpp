#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emasched/core_data.hpp"

namespace emasched {

/// One feature value; nullopt means masked (undefined or missing).
struct NamedFeature {
  std::string name;
  std::optional<double> value;
};

using FeatureSlice = std::vector<NamedFeature>;

// ---------------------------------------------------------------------------
// Statistical channel features
// ---------------------------------------------------------------------------

/// Suffixes emitted by stat_features, in order.
const std::vector<std::string>& stat_feature_names();

/// `<channel>_<stat>` for mean, median, max, min, sd, p25, p75, iqr, rms,
/// kurtosis, skew and zero_cross. Samples must be in time order (zero_cross
/// counts sign changes about the segment mean). Moments use population
/// normalisation; kurtosis is excess kurtosis.
FeatureSlice stat_features(std::string_view channel, std::span<const double> samples);

/// Linear-interpolation percentile (q in [0, 100]) of unsorted data.
double percentile(std::span<const double> data, double q);

// ---------------------------------------------------------------------------
// RR intervals and HRV
// ---------------------------------------------------------------------------

/// Criterion-beat-difference artifact rule constants.
struct RrValidationParams {
  double min_ms = 250.0;          // exclusive
  double max_ms = 3000.0;         // exclusive
  double med_factor = 3.32;       // maximum expected difference = med_factor * QD
  double mad_qd_factor = 2.9;     // minimal artifact difference = (median - mad_qd_factor * QD) / mad_divisor
  double mad_divisor = 3.0;
};

/// (MED + MAD) / 2 computed from the quartile deviation of successive differences.
double criterion_beat_difference(std::span<const double> rr_ms, const RrValidationParams& params = {});

/// Drops out-of-range beats, then any beat whose difference from the last
/// accepted beat exceeds the criterion beat difference; repeats until no beat is
/// dropped. Throws std::runtime_error("no valid RR") when nothing survives.
RrSeries validate_rr(const RrSeries& series, const RrValidationParams& params = {});

struct HrvOptions {
  std::size_t min_beats_time = 2;
  std::size_t min_beats_freq = 64;
  double interpolation_hz = 4.0;
};

const std::vector<std::string>& hrv_feature_names();

/// Time-domain statistics plus VLF/LF/HF band powers from a periodogram of the
/// cubic-spline-interpolated tachogram. NNI20/NNI50 count successive
/// differences strictly greater than 20/50 ms.
FeatureSlice hrv_features(const RrSeries& series, const HrvOptions& opts = {});

struct BandPowers {
  double vlf = 0.0;  // [0.003, 0.04) Hz
  double lf = 0.0;   // [0.04, 0.15) Hz
  double hf = 0.0;   // [0.15, 0.40) Hz
};
BandPowers rr_band_powers(const RrSeries& series, double interpolation_hz = 4.0);

// ---------------------------------------------------------------------------
// Sleep
// ---------------------------------------------------------------------------

/// Per-minute states over one night window.
struct SleepRecord {
  Timestamp window_start;
  std::vector<SleepState> minutes;

  /// First minute in bed (asleep or awake), or npos.
  std::size_t bed_start() const;
  /// One past the last asleep minute, or npos when never asleep.
  std::size_t final_awakening() const;
};

inline constexpr std::size_t kNightWindowMinutes = 18 * 60;  // 18:00 -> 12:00 local
inline constexpr int kNightWindowStartHour = 18;

SleepRecord sleep_record_for_window(std::span<const SleepInterval> intervals, Timestamp window_start,
                                    std::size_t minutes = kNightWindowMinutes);

/// 200 * (mean asleep/not-asleep agreement at a 24 h lag) - 100 over consecutive
/// records; nullopt with fewer than two records.
std::optional<double> sleep_regularity_index(std::span<const SleepRecord> records);

/// 100 * asleep minutes / in-bed minutes before the final awakening.
std::optional<double> sleep_efficiency(const SleepRecord& record);
double time_in_bed_minutes(const SleepRecord& record);
double time_asleep_minutes(const SleepRecord& record);

// ---------------------------------------------------------------------------
// Phone logs
// ---------------------------------------------------------------------------

const std::vector<std::string>& phone_feature_names();

/// Counts and durations inside [start, end). `logs` is the participant's whole
/// time-sorted log so that screen state carried in from before `start` is seen.
FeatureSlice phone_features(std::span<const PhoneEvent> logs, Timestamp start, Timestamp end);

// ---------------------------------------------------------------------------
// Location clustering
// ---------------------------------------------------------------------------

struct ClusterOptions {
  int k_min = 6;
  int k_max = 10;
  int restarts = 10;  // capped at 50
  int max_iterations = 100;
  std::uint64_t seed = 0;
};

struct LocationClusters {
  bool ok = false;                  // false => every point is "unknown"
  int k = 0;
  double silhouette = 0.0;
  int home = -1;                    // cluster id of the most populated cluster (always 0 when ok)
  std::vector<int> assignment;      // per input point; -1 for removed outliers or unknown
  std::vector<double> inertia_history;  // per Lloyd iteration of the chosen run
};

/// k-means with seeded farthest-point initialisation; k is the silhouette
/// maximiser over [k_min, k_max], ties going to the smaller k. Cluster ids are
/// ordered by size, so id 0 is home.
LocationClusters cluster_locations(std::span<const LocationSample> points, const ClusterOptions& opts = {});

/// Mean silhouette of an assignment over 2-D points; singleton clusters score 0.
double mean_silhouette(std::span<const double> xs, std::span<const double> ys, std::span<const int> labels, int k);

// ---------------------------------------------------------------------------
// Cohort extraction
// ---------------------------------------------------------------------------

struct FeatureOptions {
  int segment_width_minutes = 30;
  bool hrv_sleep_only = false;
  RrValidationParams rr;
  HrvOptions hrv;
  ClusterOptions clusters;
};

/// Builds the registry from the modalities present anywhere in the cohort and
/// fills one row per segment of every participant.
FeatureTable extract_features(const Cohort& cohort, const FeatureOptions& opts = {});

std::string features_to_csv(const FeatureTable& table);
FeatureTable features_from_csv(const std::filesystem::path& path);

}  // namespace emasched
