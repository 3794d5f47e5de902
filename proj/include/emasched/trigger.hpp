#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emasched/json_util.hpp"
#include "emasched/models.hpp"
#include "emasched/time.hpp"

namespace emasched {

enum class UncertaintyNorm { WindowMinMax, Raw };
std::string to_string(UncertaintyNorm n);
UncertaintyNorm parse_uncertainty_norm(std::string_view s);

struct TriggerConfig {
  double w_u = 1.0;
  double w_r = 1.0;
  int windows = 5;
  int window_minutes = 180;
  int step_minutes = 30;           // candidate spacing, normally the segment width
  int day_start_minute = 8 * 60;   // local time of the first window
  UncertaintyNorm norm = UncertaintyNorm::WindowMinMax;

  /// Throws ConfigError on negative weights, zero total weight or a bad grid.
  void validate() const;
  bool operator==(const TriggerConfig&) const = default;
};

/// w_u * u^2 + w_r * r^2.
double objective_j(double u, double r, const TriggerConfig& cfg);

/// Min-max over the window's candidates (constant input maps to 0.5), or the
/// raw variances unchanged.
std::vector<double> normalize_uncertainty(std::span<const double> variances, UncertaintyNorm norm);

struct Candidate {
  Timestamp time;
  ModelOutput output;
};

enum class Policy { Smart, Random };
std::string to_string(Policy p);

struct TriggerDecision {
  std::string participant;
  int day = 0;
  int window = 0;
  Timestamp time;
  std::size_t candidate = 0;  // index into the window's candidate list
  double j_value = 0.0;
  Policy policy = Policy::Smart;
};

/// Maximises J over the candidates (uncertainty normalised per cfg.norm); ties
/// go to the earliest time. Throws on an empty candidate set.
TriggerDecision select_smart(std::span<const Candidate> candidates, const TriggerConfig& cfg);

/// Uniform index in [0, n) drawn from `seed`.
std::size_t select_random(std::size_t n, std::uint64_t seed);

/// Local-time window boundaries of one day.
struct SchedulingWindow {
  int index = 0;
  Timestamp start;
  Timestamp end;
};
std::vector<SchedulingWindow> scheduling_windows(std::int64_t local_day, int utc_offset_minutes,
                                                 const TriggerConfig& cfg);
/// Candidate start times inside a window (start, start + step, ...).
std::vector<Timestamp> candidate_times(const SchedulingWindow& w, const TriggerConfig& cfg);

enum class OutcomeSource { ModelBernoulli, ModelThreshold, GenerativeTruth };
std::string to_string(OutcomeSource s);
OutcomeSource parse_outcome_source(std::string_view s);

/// Model output for one segment, optionally with planted truth at its start.
struct SegmentPrediction {
  std::string participant;
  Timestamp start;
  int study_day = 0;
  ModelOutput output;
  std::optional<double> truth_p_resp;
  std::optional<double> truth_pa;
};

struct DecisionRecord {
  TriggerDecision decision;
  ModelOutput output;
  double u_normalized = 0.0;
  bool responded = false;
  std::optional<double> truth_pa;
};

struct PolicySummary {
  std::size_t decisions = 0;
  std::size_t responses = 0;
  double response_rate = 0.0;
  double predicted_pa_variance = 0.0;  // sample variance of emo_mean over decisions
};

struct ParticipantSimulation {
  std::string participant;
  PolicySummary smart;
  PolicySummary random;
};

struct SimulationResult {
  std::vector<DecisionRecord> decisions;
  std::vector<ParticipantSimulation> participants;
  std::vector<std::string> skipped;  // "participant day window: reason"
};

/// One Smart and one Random decision per participant-day-window. Candidate
/// outputs come from `predictions` keyed by (participant, segment start); windows
/// without any prediction are skipped and logged. `utc_offsets` gives each
/// participant's local time.
SimulationResult simulate_triggers(std::span<const SegmentPrediction> predictions,
                                   const std::map<std::string, int>& utc_offsets, const TriggerConfig& cfg,
                                   OutcomeSource source, std::uint64_t seed);

Json simulation_to_json(const SimulationResult& r);
/// Inverse of simulation_to_json.
SimulationResult simulation_from_json(const Json& j);
std::string simulation_summary_csv(const SimulationResult& r);

}  // namespace emasched
