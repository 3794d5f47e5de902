#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emasched/run_config.hpp"

namespace emasched {

enum class Stage { Generate, Label, Features, Train, Simulate, Evaluate, Report };

std::string to_string(Stage s);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& pipeline_stages();

/// A stage could not run (missing prerequisite, mixed artifacts, bad input).
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageOutcome {
  Stage stage = Stage::Generate;
  bool up_to_date = false;  // skipped because inputs and config were unchanged
  std::vector<std::string> outputs;
};

/// Runs one stage, writing its artifacts atomically under cfg.out_dir and
/// recording input/output hashes in manifest.json. Progress goes to `log`.
StageOutcome run_stage(Stage stage, const RunConfig& cfg, std::ostream& log);

/// generate -> label -> features -> train -> simulate -> evaluate -> report.
/// `generate` is skipped when cfg.cohort_dir points at an existing cohort.
std::vector<StageOutcome> run_pipeline(const RunConfig& cfg, std::ostream& log);

/// Artifact file names, relative to the output directory.
namespace artifacts {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kLabels = "labels.csv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kCvPlan = "cv_plan.json";
inline constexpr const char* kModels = "models";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kSimulation = "simulation.json";
inline constexpr const char* kSimulationSummary = "simulation_summary.csv";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kStats = "stats.json";
inline constexpr const char* kCurve = "curve.csv";
inline constexpr const char* kAbsZCurve = "curve_abs_z.csv";
inline constexpr const char* kJByResponse = "j_by_response.csv";
inline constexpr const char* kReportDir = "report";
inline constexpr const char* kReport = "report/report.md";
}  // namespace artifacts

/// Predictions file: one row per predicted segment.
std::string predictions_to_csv(const FeatureTable& table, const CrossValidation& cv);
/// Rebuilds the cross-validation outputs aligned with `table`.
CrossValidation predictions_from_csv(const std::filesystem::path& path, const FeatureTable& table);

/// Labels aligned with the rows of `table` by (participant, segment start).
std::vector<LabeledSegment> align_labels(const FeatureTable& table, const std::vector<LabeledSegment>& labels);

/// Markdown report from whatever evaluation artifacts exist in `out_dir`.
/// Missing pieces become explicit "missing section" stubs.
std::string render_report(const std::filesystem::path& out_dir, const std::string& title);

}  // namespace emasched
