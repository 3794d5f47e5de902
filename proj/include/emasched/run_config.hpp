#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "emasched/experiment.hpp"
#include "emasched/json_util.hpp"
#include "emasched/synthcohort.hpp"

namespace emasched {

inline constexpr const char* kConfigEnvVar = "EMASCHED_CONFIG";

struct ReportOptions {
  std::string title = "EMA scheduling report";
};

/// Everything a pipeline run depends on. Paths are resolved against the output
/// directory and never enter the config hash.
struct RunConfig {
  std::filesystem::path out_dir = "results";
  std::filesystem::path cohort_dir;  // defaults to <out>/cohort
  CohortSpec cohort;
  ExperimentConfig experiment;
  ReportOptions report;

  std::uint64_t seed() const { return experiment.seed; }
  std::filesystem::path cohort_path() const;
  void validate() const;
};

/// Parses a config document; `seed` is mandatory unless `seed_override` is set.
/// Unknown keys and type errors raise ConfigError with the dotted field path.
RunConfig run_config_from_json(const Json& j, std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// The built-in demo configuration (10 participants, 7 days).
RunConfig default_run_config(std::uint64_t seed = 1);

/// Canonical JSON of the settings that influence outputs (no paths, no jobs).
Json run_config_to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

/// Applies the global seed to the cohort and model specs.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace emasched
