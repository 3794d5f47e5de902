#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emasched {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double weighted_precision = 0.0;
};

/// Support-weighted F1 and precision over the classes seen in either vector;
/// a class never predicted contributes precision 0.
ClassificationMetrics classification_metrics(std::span<const int> y_true, std::span<const int> y_pred);

struct RegressionMetrics {
  double rmse = 0.0;
  std::optional<double> r2;  // masked when y_true is constant
};

RegressionMetrics regression_metrics(std::span<const double> y_true, std::span<const double> y_pred);

struct TestResult {
  double statistic = 0.0;
  double p = 1.0;
};

/// Two-sided Student-t tail probability.
double student_t_two_sided_p(double t, double df);
/// Two-sided standard-normal tail probability.
double normal_two_sided_p(double z);

/// t = mean(a - b) / (sd(a - b) / sqrt(n)) with n - 1 degrees of freedom.
/// Throws when n < 2 or the differences have zero variance.
TestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

/// D = sup |F_a - F_b|; p from the asymptotic Kolmogorov distribution at
/// sqrt(nm / (n + m)) * D.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct ConditionObservation {
  std::string participant;
  bool condition = false;  // e.g. responded
  double value = 0.0;
};

struct RepeatedMeasuresResult {
  double f = 0.0;
  double p = 1.0;
  double t = 0.0;
  int df_effect = 1;
  int df_error = 0;
  std::size_t participants = 0;
  std::vector<std::string> excluded;  // participants missing one condition
};

/// Two-condition repeated-measures ANOVA on per-participant condition means
/// (condition true vs false); F equals the squared paired t statistic.
RepeatedMeasuresResult repeated_measures_f(std::span<const ConditionObservation> observations);

/// |x - mean_g| / sd_g with the population sd of each group; masked when sd_g = 0.
std::vector<std::optional<double>> abs_z_transform(std::span<const double> values,
                                                   std::span<const std::string> groups);

struct CurveRow {
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_j;  // masked for empty bins
};

/// Mean J per unit-width PA bin from floor(min PA) to floor(max PA), plus bin counts.
std::vector<CurveRow> j_vs_pa_curve(std::span<const double> j_values, std::span<const double> pa_scores);

/// Mean J per |z| bin; the last edge may be infinity.
std::vector<CurveRow> j_vs_abs_z_curve(std::span<const double> j_values, std::span<const double> abs_z,
                                       std::span<const double> edges);

std::string curve_to_csv(const std::vector<CurveRow>& rows);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 for a single value
  std::size_t n = 0;
};

MeanSd mean_sd(std::span<const double> values);

}  // namespace emasched
