#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emasched/core_data.hpp"
#include "emasched/json_util.hpp"

namespace emasched {

/// Parameters of the synthetic cohort. Latent PA is participant mean plus a
/// within-day AR(1) deviation z (unit variance, 5-minute steps); the response
/// probability is logistic(alpha + propensity + coupling * z + busy_effect * busy)
/// where alpha is calibrated so the marginal rate equals base_rate.
/// A positive coupling makes responses more likely at higher PA.
struct CohortSpec {
  int participants = 10;
  int days = 7;
  int segment_width_minutes = 30;
  double pa_min = 5.0;
  double pa_max = 25.0;
  double pa_mean = 15.0;
  double pa_between_sd = 1.0;
  double pa_within_sd = 3.5;
  double pa_skew = 0.0;           // quadratic skew applied to z
  double ar_phi = 0.97;           // per 5-minute step
  double coupling = 1.0;
  double base_rate = 0.7;
  double propensity_sd = 0.3;     // between-participant logit offsets
  double busy_effect = -2.5;      // logit shift while busy
  double busy_fraction = 0.35;
  double busy_mean_minutes = 60.0;
  double signal_strength = 1.0;   // scales PA-driven sensor terms
  int wake_minute = 7 * 60;       // local sensing span
  int sleep_minute = 24 * 60;
  int daily_prompts = 5;
  int prompt_window_start_minute = 8 * 60;
  int prompt_window_minutes = 180;
  std::string start_date = "2024-03-04";
  int utc_offset_minutes = 0;
  bool include_rr = false;
  bool include_phone = false;
  bool include_sleep = false;
  bool include_location = false;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const CohortSpec&) const = default;
};

Json cohort_spec_to_json(const CohortSpec& spec);
CohortSpec cohort_spec_from_json(const Json& j, std::string_view path = "cohort");

/// Planted state at 5-minute resolution.
struct TruthPoint {
  Timestamp time;
  double latent_pa = 0.0;
  double z = 0.0;
  int busy = 0;
  double logit_offset = 0.0;  // alpha + participant propensity
  double p_resp = 0.0;
  bool operator==(const TruthPoint&) const = default;
};

struct TruthResponse {
  Timestamp notification_time;
  double p_resp = 0.0;
  bool responded = false;
  bool operator==(const TruthResponse&) const = default;
};

struct ParticipantTruth {
  std::vector<TruthPoint> points;  // time-sorted
  std::vector<TruthResponse> responses;

  /// The point whose 5-minute step contains t, or nullptr outside the sensed span.
  const TruthPoint* at(Timestamp t) const;
  bool operator==(const ParticipantTruth&) const = default;
};

struct CohortTruth {
  double alpha = 0.0;
  std::map<std::string, ParticipantTruth> participants;
  bool operator==(const CohortTruth&) const = default;
};

struct SyntheticCohort {
  Cohort cohort;
  CohortTruth truth;
};

inline constexpr int kTruthStepMinutes = 5;

/// Intercept giving a marginal response rate of base_rate.
double calibrate_alpha(const CohortSpec& spec);

SyntheticCohort synthesize_cohort(const CohortSpec& spec);

/// Writes the cohort, truth_pa.csv / truth_resp.csv per participant and
/// cohort_spec.json. Output is byte-identical for a fixed spec.
SyntheticCohort generate_cohort(const CohortSpec& spec, const std::filesystem::path& dir);

/// Reads the planted truth written by generate_cohort; throws when missing.
CohortTruth cohort_truth(const std::filesystem::path& dir);

}  // namespace emasched
