#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emasched/experiment.hpp"
#include "emasched/run_config.hpp"

using namespace emasched;
namespace fs = std::filesystem;

namespace {

// Criteria 1-5 share one sweep over seeds on the same cohorts.
constexpr int kSeeds = 20;
constexpr int kParticipants = 40;
constexpr int kDays = 14;
constexpr double kWu = 1.0;
constexpr double kWr = 3.0;
constexpr double kMinRateGap = 0.05;
constexpr double kAlpha = 0.05;
constexpr int kMinLmmSeeds = 16;
constexpr int kMinVarianceSeeds = 14;
constexpr double kMinF1Gap = 0.05;
constexpr double kMaxSweepSeconds = 600.0;
constexpr double kKernelTol = 1e-9;
constexpr double kTDistTol = 1e-6;
constexpr double kLambdaTol = 1e-4;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct SeedOutcome {
  double smart_rate = 0, random_rate = 0, rate_p = 1;
  std::optional<LmmFit> rq1, rq2;
  std::optional<double> low_z_j, high_z_j;
  std::optional<double> variance_t;
  std::optional<double> nn_f1, random_f1, nn_r2, gaussian_r2;
};

struct Sweep {
  std::vector<SeedOutcome> seeds;
  double seconds = 0;
  std::string error;
};

RunConfig acceptance_config(std::uint64_t seed) {
  RunConfig cfg = default_run_config(seed);
  cfg.cohort.participants = kParticipants;
  cfg.cohort.days = kDays;
  cfg.cohort.coupling = 1.0;
  cfg.experiment.trigger.w_u = kWu;
  cfg.experiment.trigger.w_r = kWr;
  cfg.experiment.outcome_source = OutcomeSource::GenerativeTruth;
  cfg.experiment.cv_mode = CvMode::GroupedLoso;
  cfg.experiment.cv_groups = 5;
  return cfg;
}

std::optional<double> aggregate(const MetricsReport& m, const std::string& key) {
  const auto it = m.aggregate.find(key);
  if (it == m.aggregate.end() || it->second.n == 0) return std::nullopt;
  return it->second.mean;
}

Sweep run_sweep(int seeds) {
  Sweep sw;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    for (int s = 1; s <= seeds; ++s) {
      const RunConfig cfg = acceptance_config(static_cast<std::uint64_t>(s));
      const SyntheticCohort sc = synthesize_cohort(cfg.cohort);
      const ExperimentResult r = run_experiment(sc.cohort, &sc.truth, cfg.experiment);
      SeedOutcome o;
      const auto& rq3 = r.stats.rq3;
      o.smart_rate = rq3.smart_rate.mean;
      o.random_rate = rq3.random_rate.mean;
      if (rq3.response_rate_t) o.rate_p = rq3.response_rate_t->p;
      if (rq3.pa_variance_t) o.variance_t = rq3.pa_variance_t->statistic;
      o.rq1 = r.stats.rq1.lmm;
      o.rq2 = r.stats.rq2.lmm;
      for (const auto& row : r.stats.rq2.abs_z_curve) {
        if (!row.mean_j) continue;
        if (row.bin_hi <= 0.5) o.low_z_j = *row.mean_j;
        if (row.bin_lo >= 1.5) o.high_z_j = *row.mean_j;
      }
      o.nn_f1 = aggregate(r.metrics, "nn.weighted_f1");
      o.random_f1 = aggregate(r.metrics, "random.weighted_f1");
      o.nn_r2 = aggregate(r.metrics, "nn.r2");
      o.gaussian_r2 = aggregate(r.metrics, "gaussian.r2");
      sw.seeds.push_back(o);
      std::fprintf(stderr, "seed %d: smart %.3f random %.3f p %.2g\n", s, o.smart_rate, o.random_rate, o.rate_p);
    }
  } catch (const std::exception& e) {
    sw.error = e.what();
  }
  sw.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sw;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Verdict criterion1(const Sweep& sw) {
  if (!sw.error.empty()) return {false, sw.error};
  std::vector<double> gaps, ps;
  for (const auto& o : sw.seeds) {
    gaps.push_back(o.smart_rate - o.random_rate);
    ps.push_back(o.rate_p);
  }
  const double gap = mean_of(gaps), p = mean_of(ps);
  const bool pass = gap >= kMinRateGap && p < kAlpha && sw.seconds <= kMaxSweepSeconds;
  return {pass, "mean smart-random rate gap " + fmt("%.4f", gap) + " (>= 0.05), mean paired-t p " + fmt("%.3g", p) +
                    " (< 0.05), " + std::to_string(sw.seeds.size()) + " seeds in " + fmt("%.0f", sw.seconds) +
                    " s (<= 600), w_u=1 w_r=3"};
}

int count_positive_significant(const std::vector<SeedOutcome>& seeds, bool rq1) {
  int n = 0;
  for (const auto& o : seeds) {
    const auto& fit = rq1 ? o.rq1 : o.rq2;
    n += fit && fit->beta1 > 0 && fit->p < kAlpha;
  }
  return n;
}

Verdict criterion2(const Sweep& sw) {
  if (!sw.error.empty()) return {false, sw.error};
  const int n = count_positive_significant(sw.seeds, true);
  return {n >= kMinLmmSeeds, "beta1 > 0 with p < 0.05 in " + std::to_string(n) + "/" + std::to_string(sw.seeds.size()) +
                                 " seeds (need >= 16)"};
}

Verdict criterion3(const Sweep& sw) {
  if (!sw.error.empty()) return {false, sw.error};
  const int n = count_positive_significant(sw.seeds, false);
  int higher = 0;
  for (const auto& o : sw.seeds) higher += o.low_z_j && o.high_z_j && *o.high_z_j > *o.low_z_j;
  const int needed = static_cast<int>(sw.seeds.size());
  return {n >= kMinLmmSeeds && higher == needed,
          "beta1 > 0 with p < 0.05 in " + std::to_string(n) + "/" + std::to_string(sw.seeds.size()) +
              " seeds (need >= 16); curve higher at |z| > 1.5 than |z| < 0.5 in " + std::to_string(higher) + "/" +
              std::to_string(sw.seeds.size()) + " seeds (need all)"};
}

Verdict criterion4(const Sweep& sw) {
  if (!sw.error.empty()) return {false, sw.error};
  int n = 0;
  for (const auto& o : sw.seeds) n += o.variance_t && *o.variance_t > 0;
  return {n >= kMinVarianceSeeds, "smart within-participant PA variance above random (t > 0) in " + std::to_string(n) +
                                      "/" + std::to_string(sw.seeds.size()) + " seeds (need >= 14)"};
}

Verdict criterion5(const Sweep& sw) {
  if (!sw.error.empty()) return {false, sw.error};
  std::vector<double> f1_gap, nn_r2, g_r2;
  for (const auto& o : sw.seeds) {
    if (!o.nn_f1 || !o.random_f1 || !o.nn_r2 || !o.gaussian_r2) return {false, "missing model metrics"};
    f1_gap.push_back(*o.nn_f1 - *o.random_f1);
    nn_r2.push_back(*o.nn_r2);
    g_r2.push_back(*o.gaussian_r2);
  }
  const double gap = mean_of(f1_gap), a = mean_of(nn_r2), b = mean_of(g_r2);
  return {gap >= kMinF1Gap && a > 0 && b < 0, "participant-mean F1 gap NN-random " + fmt("%.4f", gap) +
                                                  " (>= 0.05), NN R2 " + fmt("%.4f", a) + " (> 0), Gaussian R2 " +
                                                  fmt("%.4f", b) + " (< 0)"};
}

// ---------------------------------------------------------------------------
// Criterion 6: MC dropout on the 1-D toy
// ---------------------------------------------------------------------------

TrainedModel toy_model(std::uint64_t seed, double dropout) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 0.5);
  Eigen::MatrixXd x(200, 1);
  Eigen::VectorXd y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    x(i, 0) = u(gen);
    y(i) = 15.0 + 4.0 * std::sin(2 * M_PI * x(i, 0)) + noise(gen);
  }
  MlpSpec spec = emotion_spec(seed);
  spec.dropout_rate = dropout;
  if (dropout == 0.0) spec.dropout_after.clear();
  return train_emotion(x, y, spec, "toy");
}

double mc_var(const TrainedModel& m, double x, std::uint64_t seed) {
  Eigen::RowVectorXd row(1);
  row << x;
  return mc_dropout_predict(m, row, 200, seed).var;
}

double binomial_upper_tail(int k, int n) {
  double p = 0;
  for (int i = k; i <= n; ++i) p += std::exp(std::lgamma(n + 1) - std::lgamma(i + 1) - std::lgamma(n - i + 1)) * std::pow(0.5, n);
  return p;
}

Verdict criterion6() {
  bool zero = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = toy_model(seed, 0.0);
    for (double x : {-1.0, 0.0, 0.3, 0.9, 3.0}) zero = zero && mc_var(m, x, seed) == 0.0;
  }
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = toy_model(seed, emotion_spec(seed).dropout_rate);
    double in = 0, out = 0;
    for (int k = 0; k < 5; ++k) {
      const std::uint64_t s = seed * 100 + static_cast<std::uint64_t>(k);
      in += mc_var(m, 0.2 + 0.15 * k, s);
      out += mc_var(m, 2.5 + 0.5 * k, s);
    }
    wins += out > in;
  }
  const double p = binomial_upper_tail(wins, 20);
  return {zero && p < kAlpha, std::string("dropout 0 variance exactly 0: ") + (zero ? "yes" : "no") +
                                  "; OOD variance larger in " + std::to_string(wins) + "/20 seeds, sign test p " +
                                  fmt("%.3g", p) + " (< 0.05)"};
}

// ---------------------------------------------------------------------------
// Criterion 7: statistical kernels against independent oracles
// ---------------------------------------------------------------------------

double t_two_sided_by_integration(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3;
}

double kolmogorov_theta(double lambda) {
  double s = 0;
  for (int k = 1; k < 200; ++k) s += std::exp(-(2 * k - 1) * (2 * k - 1) * M_PI * M_PI / (8 * lambda * lambda));
  return std::clamp(1.0 - std::sqrt(2 * M_PI) / lambda * s, 0.0, 1.0);
}

struct Worst {
  double err = 0;
  void see(double a, double b) { err = std::max(err, std::abs(a - b)); }
};

Verdict criterion7() {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd(0, 1);
  Worst t_stat, t_p, ks_d, ks_p, f1, prec, rmse, r2, absz, lam;

  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + gen() % 30;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = nd(gen);
      b[i] = a[i] + 0.3 + 0.8 * nd(gen);
    }
    double md = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) md += a[i] - b[i];
    md /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
    const double t = md / std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    const auto r = paired_t_test(a, b);
    t_stat.see(r.statistic, t);
    t_p.see(r.p, t_two_sided_by_integration(t, static_cast<double>(n - 1)));

    std::vector<double> c(3 + gen() % 40);
    for (double& v : c) v = std::round((nd(gen) + 0.4) * 3) / 3;
    std::vector<double> a3 = a;
    for (double& v : a3) v = std::round(v * 3) / 3;
    double d = 0;
    auto ecdf = [](const std::vector<double>& s, double x) {
      return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; })) /
             static_cast<double>(s.size());
    };
    for (const auto* s : {&a3, &c})
      for (double x : *s) d = std::max(d, std::abs(ecdf(a3, x) - ecdf(c, x)));
    const auto k = ks_two_sample(a3, c);
    ks_d.see(k.statistic, d);
    const double na = static_cast<double>(a3.size()), nc = static_cast<double>(c.size());
    const double lambda = std::sqrt(na * nc / (na + nc)) * d;
    if (lambda > 0.2) ks_p.see(k.p, kolmogorov_theta(lambda));

    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = static_cast<int>(gen() % 2);
      yp[i] = static_cast<int>(gen() % 2);
    }
    double wf = 0, wp = 0;
    for (int cls : {0, 1}) {
      double tp = 0, fp = 0, fn = 0, sup = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sup += yt[i] == cls;
        tp += yt[i] == cls && yp[i] == cls;
        fp += yt[i] != cls && yp[i] == cls;
        fn += yt[i] == cls && yp[i] != cls;
      }
      const double pr = tp + fp > 0 ? tp / (tp + fp) : 0, rc = tp + fn > 0 ? tp / (tp + fn) : 0;
      wf += sup * (pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0);
      wp += sup * pr;
    }
    const auto cm = classification_metrics(yt, yp);
    f1.see(cm.weighted_f1, wf / static_cast<double>(n));
    prec.see(cm.weighted_precision, wp / static_cast<double>(n));

    double sse = 0, mu = 0, sst = 0;
    for (std::size_t i = 0; i < n; ++i) sse += (a[i] - b[i]) * (a[i] - b[i]), mu += a[i];
    mu /= static_cast<double>(n);
    for (double v : a) sst += (v - mu) * (v - mu);
    const auto rm = regression_metrics(a, b);
    rmse.see(rm.rmse, std::sqrt(sse / static_cast<double>(n)));
    r2.see(*rm.r2, 1 - sse / sst);

    std::vector<std::string> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = i % 3 ? "x" : "y";
    const auto z = abs_z_transform(a, g);
    for (std::size_t i = 0; i < n; ++i) {
      double m = 0, cnt = 0, v = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (g[j] == g[i]) m += a[j], ++cnt;
      m /= cnt;
      for (std::size_t j = 0; j < n; ++j)
        if (g[j] == g[i]) v += (a[j] - m) * (a[j] - m);
      if (z[i]) absz.see(*z[i], std::abs(a[i] - m) / std::sqrt(v / cnt));
    }
  }

  int recovered = 0;
  const int fixtures = 10;
  for (int f = 0; f < fixtures; ++f) {
    std::vector<double> y, x;
    std::vector<std::string> g;
    for (int k = 0; k < 50; ++k) {
      const double u = nd(gen);
      for (int i = 0; i < 20; ++i) {
        x.push_back(nd(gen));
        y.push_back(1.0 + 0.5 * x.back() + u + 0.5 * nd(gen));
        g.push_back("g" + std::to_string(k));
      }
    }
    const auto fit = fit_random_intercept_lmm(y, x, g);
    recovered += std::abs(fit.beta1 - 0.5) <= 3 * fit.se_beta1;
    Eigen::MatrixXd X(x.size(), 2);
    Eigen::VectorXd Y(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = x[i];
      Y(i) = y[i];
    }
    const Eigen::Vector2d ols = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
    const auto gls = gls_at_lambda(y, x, g, 1e-9);
    lam.see(gls.beta(0), ols(0));
    lam.see(gls.beta(1), ols(1));
  }

  const bool pass = t_stat.err <= kKernelTol && t_p.err <= kTDistTol && ks_d.err <= kKernelTol &&
                    ks_p.err <= kKernelTol && f1.err <= kKernelTol && prec.err <= kKernelTol &&
                    rmse.err <= kKernelTol && r2.err <= kKernelTol && absz.err <= kKernelTol && lam.err <= kLambdaTol &&
                    recovered == fixtures;
  std::ostringstream d;
  d << "max errors: t " << t_stat.err << ", t p " << t_p.err << ", KS D " << ks_d.err << ", KS p " << ks_p.err
    << ", F1 " << f1.err << ", precision " << prec.err << ", RMSE " << rmse.err << ", R2 " << r2.err << ", abs-z "
    << absz.err << ", GLS(lambda->0) vs OLS " << lam.err << "; beta1 within 3 SE in " << recovered << "/" << fixtures;
  return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// Criterion 8: labeling rules on randomized streams
// ---------------------------------------------------------------------------

constexpr std::int64_t kDay = 1709510400;

std::vector<Segment> grid(int width, int hours) {
  std::vector<Segment> segs;
  for (int m = 0; m < hours * 60; m += width) {
    Segment s;
    s.participant_id = "p";
    s.start = Timestamp{kDay + m * 60};
    s.width_minutes = width;
    s.sample_count = 1;
    segs.push_back(s);
  }
  return segs;
}

std::int64_t overlap(const Segment& s, std::int64_t lo, std::int64_t hi) {
  return std::max<std::int64_t>(0, std::min(s.end().seconds, hi) - std::max(s.start.seconds, lo));
}

bool half_covered(const Segment& s, std::int64_t lo, std::int64_t hi) {
  const auto o = overlap(s, lo, hi);
  return o > 0 && 2 * o >= s.width_minutes * 60LL;
}

std::vector<EmaEvent> random_stream(std::mt19937_64& gen, int count, bool on_hour_grid) {
  std::vector<EmaEvent> evs;
  std::int64_t t = kDay + 3600;
  for (int i = 0; i < count; ++i) {
    t += on_hour_grid ? 3600 * (2 + static_cast<std::int64_t>(gen() % 3)) : 600 + static_cast<std::int64_t>(gen() % 10800);
    EmaEvent e;
    e.notification_time = Timestamp{t};
    if (gen() % 3) {
      e.response_time = Timestamp{t + static_cast<std::int64_t>(gen() % 3601)};
      e.pa_score = 5.0 + static_cast<double>(gen() % 21);
    }
    evs.push_back(e);
  }
  return evs;
}

Verdict criterion8() {
  std::mt19937_64 gen(8);
  std::size_t checked = 0, mismatches = 0, dual = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int width = kAllowedWidths[gen() % 5];
    const auto segs = grid(width, 40);
    const auto evs = random_stream(gen, 1 + static_cast<int>(gen() % 9), false);
    const auto ls = label_receptivity(segs, evs, width);
    if (ls.size() != segs.size()) return {false, "label count differs from segment count"};
    for (std::size_t i = 0; i < segs.size(); ++i) {
      bool rec = false, non = false;
      std::int64_t best = -1;
      std::optional<double> pa;
      for (const auto& e : evs) {
        if (e.responded()) {
          const std::int64_t hi = e.response_time->seconds;
          if (!half_covered(segs[i], hi - width * 60LL, hi)) continue;
          rec = true;
          const std::int64_t d = std::llabs(2 * hi - segs[i].start.seconds - segs[i].end().seconds);
          if (best < 0 || d < best) best = d, pa = e.pa_score;
        } else if (half_covered(segs[i], e.notification_time.seconds, e.notification_time.seconds + 3600)) {
          non = true;
        }
      }
      const auto expected = rec ? ReceptivityLabel::Receptive : non ? ReceptivityLabel::NonReceptive : ReceptivityLabel::Unlabeled;
      ++checked;
      mismatches += ls[i].receptivity != expected || ls[i].pa_score != pa;
      dual += ls[i].pa_score.has_value() != (ls[i].receptivity == ReceptivityLabel::Receptive);
    }
  }
  std::size_t width_dependent = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto evs = random_stream(gen, 1 + static_cast<int>(gen() % 8), true);
    std::set<std::int64_t> spans;
    for (int width : kAllowedWidths) {
      const auto ls = label_receptivity(grid(width, 40), evs, width);
      std::int64_t covered = 0;
      for (const auto& e : evs)
        if (!e.responded())
          for (const auto& l : ls)
            if (l.receptivity != ReceptivityLabel::Unlabeled)
              covered += overlap(l.segment, e.notification_time.seconds, e.notification_time.seconds + 3600);
      spans.insert(covered);
    }
    width_dependent += spans.size() != 1;
  }
  const bool pass = mismatches == 0 && dual == 0 && width_dependent == 0;
  return {pass, std::to_string(checked) + " segments over 500 random streams: " + std::to_string(mismatches) +
                    " rule mismatches, " + std::to_string(dual) + " dual labels; 60-min non-response span width-dependent in " +
                    std::to_string(width_dependent) + "/200 streams"};
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical pipeline runs through the CLI
// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Verdict criterion9(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  const fs::path root = fs::temp_directory_path() / "emasched_acceptance_det";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const std::string cmd = cli + " pipeline --seed 11 --out " + (root / run).string() + " > " +
                            (root.string() + "_" + run + ".log") + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("pipeline run ") + run + " failed"};
  }
  const auto a = snapshot(root / "a"), b = snapshot(root / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  fs::remove_all(root);
  return {differing == 0 && !a.empty(), std::to_string(a.size()) + " files compared, " + std::to_string(differing) +
                                            " differ (seed 11, two executions)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string cli;
  int seeds = kSeeds;
  app.add_option("--cli", cli, "Path to the emasched executable");
  app.add_option("--seeds", seeds, "Seeds for criteria 1-5")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const Sweep sweep = run_sweep(seeds);
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, [&] { return criterion1(sweep); }}, {2, [&] { return criterion2(sweep); }},
      {3, [&] { return criterion3(sweep); }}, {4, [&] { return criterion4(sweep); }},
      {5, [&] { return criterion5(sweep); }}, {6, criterion6},
      {7, criterion7},                        {8, criterion8},
      {9, [&] { return criterion9(cli); }},
  };
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
