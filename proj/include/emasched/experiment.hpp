#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emasched/cv.hpp"
#include "emasched/features.hpp"
#include "emasched/json_util.hpp"
#include "emasched/labeling.hpp"
#include "emasched/lmm.hpp"
#include "emasched/models.hpp"
#include "emasched/stats.hpp"
#include "emasched/synthcohort.hpp"
#include "emasched/trigger.hpp"

namespace emasched {

struct ExperimentConfig {
  FeatureOptions features;
  LabelingOptions labeling;
  CvMode cv_mode = CvMode::GroupedLoso;
  int cv_groups = 5;
  MlpSpec receptivity = receptivity_spec(0);
  MlpSpec emotion = emotion_spec(0);
  int mc_passes = 200;
  TriggerConfig trigger;
  OutcomeSource outcome_source = OutcomeSource::ModelBernoulli;
  std::vector<double> abs_z_edges = {0.0, 0.5, 1.0, 1.5, std::numeric_limits<double>::infinity()};
  std::uint64_t seed = 1;
  int jobs = 1;  // worker threads for cross-validation folds
};

/// Labels aligned with the rows of a feature table.
std::vector<LabeledSegment> label_table(const Cohort& cohort, const FeatureTable& table,
                                        const LabelingOptions& opts = {});

/// Every row scaled with the semi-personalised bounds of its own participant and
/// study day (falling back to other participants for features absent from the
/// participant's earlier days). Row-for-row equal to normalize_semi_personalized.
Eigen::MatrixXd normalize_rows(const FeatureTable& table);

/// Whether a segment start falls on the candidate grid of a scheduling window.
bool is_candidate_time(Timestamp t, int utc_offset_minutes, const TriggerConfig& cfg);

/// Rows whose segment start is a candidate prompt time inside a scheduling window.
std::vector<std::size_t> candidate_rows(const Cohort& cohort, const FeatureTable& table, const TriggerConfig& cfg);

/// Row lookup by (participant, instant) through the segment grid.
class RowIndex {
 public:
  RowIndex(const Cohort& cohort, const FeatureTable& table);
  std::optional<std::size_t> find(const std::string& participant, Timestamp t) const;

 private:
  std::map<std::string, std::pair<int, int>> grid_;  // offset, width
  std::map<std::string, std::map<std::int64_t, std::size_t>> rows_;
};

struct FoldReport {
  std::vector<std::string> test_participants;
  std::size_t train_labeled = 0;
  std::size_t train_pa = 0;
  bool trained = false;
  std::string note;
};

struct CrossValidation {
  std::vector<std::optional<ModelOutput>> outputs;  // aligned with table rows
  std::vector<std::optional<double>> nb_prob;       // naive Bayes P(receptive), labeled rows
  std::vector<std::optional<int>> bernoulli_draw;   // random baseline, labeled rows
  std::vector<std::optional<double>> gaussian_draw; // emotion baseline, PA rows
  std::vector<std::optional<double>> ols_pred;      // linear baseline, PA rows
  std::vector<FoldReport> folds;
  std::vector<TrainedModel> receptivity_models;     // per trained fold
  std::vector<TrainedModel> emotion_models;
};

/// Trains fold models and predicts the rows flagged in `predict_rows` (plus all
/// labeled rows of the test participants). Results do not depend on cfg.jobs.
CrossValidation cross_validate(const FeatureTable& table, const Eigen::MatrixXd& normalized,
                               const std::vector<LabeledSegment>& labels, const std::vector<bool>& predict_rows,
                               const ExperimentConfig& cfg);

struct ParticipantMetrics {
  std::string participant;
  std::optional<ClassificationMetrics> nn;
  std::optional<ClassificationMetrics> random_baseline;
  std::optional<ClassificationMetrics> naive_bayes;
  std::optional<RegressionMetrics> nn_regression;
  std::optional<RegressionMetrics> gaussian_baseline;
  std::optional<RegressionMetrics> linear_baseline;
  std::string note;
};

/// Participant-level two-condition comparison of one metric between two learners
/// (F = t^2 of the paired t-test over participants having both values).
struct ModelComparison {
  std::string metric;
  std::string model_a;
  std::string model_b;
  std::size_t participants = 0;
  std::optional<double> f;
  std::optional<double> p;
  std::string note;
};

struct MetricsReport {
  std::vector<ParticipantMetrics> participants;
  std::map<std::string, MeanSd> aggregate;  // e.g. "nn.weighted_f1"
  std::vector<ModelComparison> comparisons;
};

MetricsReport compute_metrics(const FeatureTable& table, const std::vector<LabeledSegment>& labels,
                              const CrossValidation& cv);

/// J at each candidate row with uncertainty normalised inside its window.
struct JTable {
  std::map<std::size_t, double> j;
  std::map<std::size_t, double> u;
};
JTable compute_j_table(const Cohort& cohort, const FeatureTable& table, const std::vector<std::size_t>& candidates,
                       const CrossValidation& cv, const TriggerConfig& cfg);

struct Rq1Result {
  std::size_t observations = 0;
  std::optional<LmmFit> lmm;
  std::optional<RepeatedMeasuresResult> anova;
  std::vector<std::string> notes;
};

struct Rq2Result {
  std::size_t observations = 0;
  std::optional<LmmFit> lmm;
  std::vector<CurveRow> pa_curve;
  std::vector<CurveRow> abs_z_curve;
  std::vector<std::string> notes;
};

struct Rq3Result {
  std::size_t participants = 0;
  std::optional<TestResult> response_rate_t;  // smart - random
  std::optional<TestResult> pa_variance_t;    // smart - random
  std::optional<TestResult> ks_predicted_pa;
  MeanSd smart_rate, random_rate, smart_variance, random_variance;
  std::vector<std::string> notes;
};

/// Responses (and J) collected for the box-plot of J by response status.
struct JByResponse {
  std::vector<double> responded;
  std::vector<double> missed;
};

struct StatsReport {
  Rq1Result rq1;
  Rq2Result rq2;
  Rq3Result rq3;
  JByResponse box;
};

/// RQ1 and RQ2 from the cohort's own prompts; RQ3 from a trigger simulation.
StatsReport compute_stats(const Cohort& cohort, const FeatureTable& table, const RowIndex& index, const JTable& jt,
                          const SimulationResult* sim, const ExperimentConfig& cfg);

/// Simulation inputs for the candidate rows, with planted truth when available.
std::vector<SegmentPrediction> segment_predictions(const FeatureTable& table, const std::vector<std::size_t>& candidates,
                                                   const CrossValidation& cv, const CohortTruth* truth);

struct ExperimentResult {
  FeatureTable table;
  std::vector<LabeledSegment> labels;
  CrossValidation cv;
  MetricsReport metrics;
  JTable j;
  SimulationResult simulation;
  StatsReport stats;
};

/// The whole offline pipeline in memory.
ExperimentResult run_experiment(const Cohort& cohort, const CohortTruth* truth, const ExperimentConfig& cfg);

Json metrics_to_json(const MetricsReport& m);
Json stats_to_json(const StatsReport& s);

}  // namespace emasched
