#include "emasched/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "emasched/io.hpp"

namespace emasched {

ClassificationMetrics classification_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("classification metrics of empty input");
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("label vectors differ in length");
  std::set<int> classes(y_true.begin(), y_true.end());
  classes.insert(y_pred.begin(), y_pred.end());
  const double n = static_cast<double>(y_true.size());
  ClassificationMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i];
  m.accuracy = static_cast<double>(correct) / n;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double support = tp + fn;
    if (support == 0) continue;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp / support;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.weighted_precision += support / n * precision;
    m.weighted_f1 += support / n * f1;
  }
  return m;
}

RegressionMetrics regression_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("vectors differ in length");
  if (y_true.size() < 2) throw std::invalid_argument("regression metrics need at least two values");
  const double n = static_cast<double>(y_true.size());
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= n;
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    sse += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    sst += (y_true[i] - mean) * (y_true[i] - mean);
  }
  RegressionMetrics r;
  r.rmse = std::sqrt(sse / n);
  if (sst > 0.0) r.r2 = 1.0 - sse / sst;
  return r;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double normal_two_sided_p(double z) {
  if (!std::isfinite(z)) return 0.0;
  boost::math::normal dist;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(z))));
}

TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  if (!(ss > 0.0)) throw std::invalid_argument("zero variance in paired differences");
  const double sd = std::sqrt(ss / (n - 1.0));
  TestResult r;
  r.statistic = mean / (sd / std::sqrt(n));
  r.p = student_t_two_sided_p(r.statistic, n - 1.0);
  return r;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double kPi = 3.14159265358979323846;
  if (lambda < 1.18) {
    // Jacobi theta form converges fast for small lambda
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = (2.0 * k - 1.0) * kPi / lambda;
      s += std::exp(-t * t / 8.0);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * kPi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  TestResult r;
  r.statistic = d;
  r.p = kolmogorov_sf(std::sqrt(n * m / (n + m)) * d);
  return r;
}

RepeatedMeasuresResult repeated_measures_f(std::span<const ConditionObservation> observations) {
  struct Acc {
    double sum[2] = {0.0, 0.0};
    int n[2] = {0, 0};
  };
  std::map<std::string, Acc> acc;
  for (const auto& o : observations) {
    auto& a = acc[o.participant];
    a.sum[o.condition ? 1 : 0] += o.value;
    a.n[o.condition ? 1 : 0] += 1;
  }
  RepeatedMeasuresResult r;
  std::vector<double> yes, no;
  for (const auto& [id, a] : acc) {
    if (a.n[0] == 0 || a.n[1] == 0) {
      r.excluded.push_back(id);
      continue;
    }
    yes.push_back(a.sum[1] / a.n[1]);
    no.push_back(a.sum[0] / a.n[0]);
  }
  if (yes.size() < 2) throw std::invalid_argument("repeated-measures F needs two participants with both conditions");
  const TestResult t = paired_t_test(yes, no);
  r.t = t.statistic;
  r.f = t.statistic * t.statistic;
  r.p = t.p;
  r.participants = yes.size();
  r.df_error = static_cast<int>(yes.size()) - 1;
  return r;
}

std::vector<std::optional<double>> abs_z_transform(std::span<const double> values,
                                                   std::span<const std::string> groups) {
  if (values.size() != groups.size()) throw std::invalid_argument("values and groups differ in length");
  std::map<std::string, std::pair<double, double>> moments;  // mean, sd
  std::map<std::string, std::vector<double>> members;
  for (std::size_t i = 0; i < values.size(); ++i) members[groups[i]].push_back(values[i]);
  for (const auto& [g, v] : members) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    moments[g] = {mean, std::sqrt(ss / static_cast<double>(v.size()))};
  }
  std::vector<std::optional<double>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto [mean, sd] = moments[groups[i]];
    if (sd > 0.0) out[i] = std::abs(values[i] - mean) / sd;
  }
  return out;
}

namespace {

std::vector<CurveRow> binned_mean(std::span<const double> j_values, std::span<const double> keys,
                                  std::span<const double> edges) {
  std::vector<CurveRow> rows(edges.size() - 1);
  std::vector<double> sums(rows.size(), 0.0);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    rows[b].bin_lo = edges[b];
    rows[b].bin_hi = edges[b + 1];
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto it = std::upper_bound(edges.begin(), edges.end(), keys[i]);
    if (it == edges.begin()) continue;
    auto b = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= rows.size()) {
      if (keys[i] != edges.back()) continue;
      b = rows.size() - 1;  // closed top edge
    }
    rows[b].count += 1;
    sums[b] += j_values[i];
  }
  for (std::size_t b = 0; b < rows.size(); ++b)
    if (rows[b].count > 0) rows[b].mean_j = sums[b] / static_cast<double>(rows[b].count);
  return rows;
}

}  // namespace

std::vector<CurveRow> j_vs_pa_curve(std::span<const double> j_values, std::span<const double> pa_scores) {
  if (j_values.size() != pa_scores.size()) throw std::invalid_argument("J and PA differ in length");
  if (pa_scores.empty()) throw std::invalid_argument("empty curve input");
  const auto [mn, mx] = std::minmax_element(pa_scores.begin(), pa_scores.end());
  const double lo = std::floor(*mn), hi = std::floor(*mx) + 1.0;
  std::vector<double> edges;
  for (double e = lo; e <= hi; e += 1.0) edges.push_back(e);
  return binned_mean(j_values, pa_scores, edges);
}

std::vector<CurveRow> j_vs_abs_z_curve(std::span<const double> j_values, std::span<const double> abs_z,
                                       std::span<const double> edges) {
  if (j_values.size() != abs_z.size()) throw std::invalid_argument("J and |z| differ in length");
  if (edges.size() < 2) throw std::invalid_argument("need at least two bin edges");
  return binned_mean(j_values, abs_z, edges);
}

std::string curve_to_csv(const std::vector<CurveRow>& rows) {
  std::string out = "bin_lo,bin_hi,count,mean_j\n";
  for (const auto& r : rows) {
    out += format_double(r.bin_lo) + "," + format_double(r.bin_hi) + "," + std::to_string(r.count) + "," +
           (r.mean_j ? format_double(*r.mean_j) : "") + "\n";
  }
  return out;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd m;
  m.n = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

}  // namespace emasched
