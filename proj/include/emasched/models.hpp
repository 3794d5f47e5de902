#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emasched/json_util.hpp"
#include "emasched/mlp.hpp"

namespace emasched {

/// Two ReLU hidden layers (16, 8), sigmoid output, binary cross-entropy, no dropout.
MlpSpec receptivity_spec(std::uint64_t seed);
/// Leaky-ReLU hidden layers (64, 32, 16), dropout 0.3 after the first two, MSE.
MlpSpec emotion_spec(std::uint64_t seed);

Json spec_to_json(const MlpSpec& spec);
MlpSpec spec_from_json(const Json& j, std::string_view path = "spec");

enum class ModelKind { Receptivity, Emotion };

struct TrainedModel {
  ModelKind kind = ModelKind::Receptivity;
  Mlp net;
  std::string registry_hash;
  double target_mean = 0.0;  // emotion targets are standardised for training
  double target_sd = 1.0;
  std::vector<double> training_log;  // full-data loss before training, then per epoch

  bool operator==(const TrainedModel&) const = default;
};

/// One prediction per segment: response probability, MC-dropout mean and variance.
struct ModelOutput {
  double r_prob = 0.0;
  double emo_mean = 0.0;
  double emo_var = 0.0;
};

/// Labels are 0/1. Throws on an empty set or "degenerate labels" (one class).
TrainedModel train_receptivity(const Eigen::MatrixXd& x, std::span<const int> labels, const MlpSpec& spec,
                               std::string registry_hash);
double predict_receptivity(const TrainedModel& model, const Eigen::RowVectorXd& row,
                           std::string_view registry_hash);
Eigen::VectorXd predict_receptivity(const TrainedModel& model, const Eigen::MatrixXd& rows,
                                    std::string_view registry_hash);

/// Throws "zero-variance target" when fewer than two distinct PA values exist.
TrainedModel train_emotion(const Eigen::MatrixXd& x, const Eigen::VectorXd& pa, const MlpSpec& spec,
                           std::string registry_hash);

struct McEstimate {
  double mean = 0.0;
  double var = 0.0;  // population variance over passes, PA units squared
};

/// `passes` dropout-enabled forward passes; pass k draws its masks from (seed, k).
McEstimate mc_dropout_predict(const TrainedModel& model, const Eigen::RowVectorXd& row, int passes,
                              std::uint64_t seed);
/// Row i behaves exactly like mc_dropout_predict(model, rows.row(i), passes, seeds[i]).
std::vector<McEstimate> mc_dropout_predict(const TrainedModel& model, const Eigen::MatrixXd& rows, int passes,
                                           std::span<const std::uint64_t> seeds);

/// Deterministic point prediction with dropout disabled.
Eigen::VectorXd predict_emotion(const TrainedModel& model, const Eigen::MatrixXd& rows);

Json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const Json& j);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Predicts a response with the training response rate.
struct BernoulliBaseline {
  double p = 0.0;
  int sample(Rng& rng) const { return uniform01(rng) < p ? 1 : 0; }
};

/// Draws emotion scores from N(mean, sd) of the training labels.
struct GaussianBaseline {
  double mean = 0.0;
  double sd = 0.0;
  double sample(Rng& rng) const { return normal(rng, mean, sd); }
};

/// Linear regression with intercept; falls back to ridge on a rank-deficient design.
struct OlsModel {
  Eigen::VectorXd coef;  // intercept first
  bool ridge = false;

  double predict(const Eigen::RowVectorXd& row) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& rows) const;
};

struct GaussianNaiveBayes {
  Eigen::Vector2d log_prior;
  Eigen::MatrixXd means;  // 2 x d
  Eigen::MatrixXd vars;   // 2 x d

  /// P(class 1 | row).
  double predict_proba(const Eigen::RowVectorXd& row) const;
  int predict(const Eigen::RowVectorXd& row) const { return predict_proba(row) >= 0.5 ? 1 : 0; }
};

BernoulliBaseline fit_bernoulli(std::span<const int> labels);
GaussianBaseline fit_gaussian(std::span<const double> pa);
OlsModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge_scale = 1e-4);
GaussianNaiveBayes fit_naive_bayes(const Eigen::MatrixXd& x, std::span<const int> labels);

struct Baselines {
  BernoulliBaseline receptivity;
  GaussianBaseline emotion;
  OlsModel linear;
  GaussianNaiveBayes naive_bayes;
};

Baselines fit_baselines(const Eigen::MatrixXd& x_receptivity, std::span<const int> labels,
                        const Eigen::MatrixXd& x_emotion, const Eigen::VectorXd& pa);

}  // namespace emasched
