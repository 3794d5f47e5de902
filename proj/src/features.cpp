#include "emasched/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include <fftw3.h>

#include "emasched/io.hpp"
#include "emasched/rng.hpp"

namespace emasched {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Statistical features
// ---------------------------------------------------------------------------

const std::vector<std::string>& stat_feature_names() {
  static const std::vector<std::string> names = {"mean", "median", "max", "min",      "sd",   "p25",
                                                 "p75",  "iqr",    "rms", "kurtosis", "skew", "zero_cross"};
  return names;
}

double percentile(std::span<const double> data, double q) {
  if (data.empty()) throw std::invalid_argument("percentile of empty data");
  std::vector<double> v(data.begin(), data.end());
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

FeatureSlice stat_features(std::string_view channel, std::span<const double> samples) {
  const auto& names = stat_feature_names();
  FeatureSlice out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back({std::string(channel) + "_" + n, std::nullopt});
  if (samples.empty()) return out;

  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double mn = *mn_it, mx = *mx_it;
  const bool constant = mn == mx;
  const double mean = constant ? mn : mean_of(samples);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, sq = 0.0;
  for (double x : samples) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    sq += x * x;
  }
  const double n = static_cast<double>(samples.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;

  int zero_cross = 0;
  int last_sign = 0;
  for (double x : samples) {
    const int s = (x > mean) - (x < mean);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) ++zero_cross;
    last_sign = s;
  }

  const double p25 = percentile(samples, 25.0);
  const double p75 = percentile(samples, 75.0);
  out[0].value = mean;
  out[1].value = percentile(samples, 50.0);
  out[2].value = mx;
  out[3].value = mn;
  out[4].value = constant ? 0.0 : std::sqrt(m2);
  out[5].value = p25;
  out[6].value = p75;
  out[7].value = p75 - p25;
  out[8].value = std::sqrt(sq / n);
  if (!constant && m2 > 0.0) {
    out[9].value = m4 / (m2 * m2) - 3.0;
    out[10].value = m3 / std::pow(m2, 1.5);
  }
  out[11].value = static_cast<double>(zero_cross);
  return out;
}

// ---------------------------------------------------------------------------
// RR validation
// ---------------------------------------------------------------------------

double criterion_beat_difference(std::span<const double> rr_ms, const RrValidationParams& params) {
  if (rr_ms.empty()) throw std::invalid_argument("criterion beat difference of empty series");
  double qd = 0.0;
  if (rr_ms.size() >= 2) {
    std::vector<double> diffs(rr_ms.size() - 1);
    for (std::size_t i = 1; i < rr_ms.size(); ++i) diffs[i - 1] = std::abs(rr_ms[i] - rr_ms[i - 1]);
    qd = (percentile(diffs, 75.0) - percentile(diffs, 25.0)) / 2.0;
  }
  const double med = params.med_factor * qd;
  const double mad = (percentile(rr_ms, 50.0) - params.mad_qd_factor * qd) / params.mad_divisor;
  return (med + mad) / 2.0;
}

RrSeries validate_rr(const RrSeries& series, const RrValidationParams& params) {
  RrSeries cur;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double v = series.rr_ms[i];
    if (v > params.min_ms && v < params.max_ms) {
      cur.times.push_back(series.times[i]);
      cur.rr_ms.push_back(v);
    }
  }
  if (cur.empty()) throw std::runtime_error("no valid RR");
  while (true) {
    const double cbd = criterion_beat_difference(cur.rr_ms, params);
    double ref = percentile(cur.rr_ms, 50.0);
    RrSeries next;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (std::abs(cur.rr_ms[i] - ref) <= cbd) {
        next.times.push_back(cur.times[i]);
        next.rr_ms.push_back(cur.rr_ms[i]);
        ref = cur.rr_ms[i];
      }
    }
    if (next.empty()) throw std::runtime_error("no valid RR");
    if (next.size() == cur.size()) return next;
    cur = std::move(next);
  }
}

// ---------------------------------------------------------------------------
// HRV
// ---------------------------------------------------------------------------

const std::vector<std::string>& hrv_feature_names() {
  static const std::vector<std::string> names = {
      "hrv_mean_nni", "hrv_sdnn", "hrv_rmssd", "hrv_nni_50", "hrv_pnni_50", "hrv_nni_20", "hrv_pnni_20",
      "hrv_cvsd",     "hrv_cvnni", "hrv_vlf",  "hrv_lf",     "hrv_hf",      "hrv_hf_lf"};
  return names;
}

namespace {

/// Natural cubic spline through strictly increasing knots.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
    b[0] = b[n - 1] = 1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      a[i] = h0;
      b[i] = 2.0 * (h0 + h1);
      c[i] = h1;
      d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    // Thomas algorithm
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, n - 2);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

BandPowers rr_band_powers(const RrSeries& series, double interpolation_hz) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!x.empty() && series.times[i] <= x.back()) continue;
    x.push_back(series.times[i]);
    y.push_back(series.rr_ms[i]);
  }
  BandPowers bp;
  if (x.size() < 3) return bp;
  const NaturalCubicSpline spline(x, y);
  const double step = 1.0 / interpolation_hz;
  const auto n = static_cast<std::size_t>(std::floor((x.back() - x.front()) / step)) + 1;
  if (n < 4) return bp;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = spline(x.front() + static_cast<double>(i) * step);
  const double mu = mean_of(grid);
  for (double& g : grid) g -= mu;

  std::vector<fftw_complex> spec(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), grid.data(), spec.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  const double df = interpolation_hz / static_cast<double>(n);
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    double psd = (spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1]) / (interpolation_hz * static_cast<double>(n));
    if (!(n % 2 == 0 && k == n / 2)) psd *= 2.0;  // one-sided
    const double power = psd * df;
    if (f >= 0.003 && f < 0.04) bp.vlf += power;
    else if (f >= 0.04 && f < 0.15) bp.lf += power;
    else if (f >= 0.15 && f < 0.40) bp.hf += power;
  }
  return bp;
}

FeatureSlice hrv_features(const RrSeries& series, const HrvOptions& opts) {
  const auto& names = hrv_feature_names();
  FeatureSlice out;
  for (const auto& n : names) out.push_back({n, std::nullopt});
  const std::size_t n = series.size();
  if (n >= std::max<std::size_t>(2, opts.min_beats_time)) {
    const auto& rr = series.rr_ms;
    const double mean = mean_of(rr);
    double ss = 0.0;
    for (double v : rr) ss += (v - mean) * (v - mean);
    const double sdnn = std::sqrt(ss / static_cast<double>(n - 1));
    double sq = 0.0;
    int nn50 = 0, nn20 = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = rr[i] - rr[i - 1];
      sq += d * d;
      if (std::abs(d) > 50.0) ++nn50;
      if (std::abs(d) > 20.0) ++nn20;
    }
    const double nd = static_cast<double>(n - 1);
    const double rmssd = std::sqrt(sq / nd);
    out[0].value = mean;
    out[1].value = sdnn;
    out[2].value = rmssd;
    out[3].value = nn50;
    out[4].value = 100.0 * nn50 / nd;
    out[5].value = nn20;
    out[6].value = 100.0 * nn20 / nd;
    out[7].value = rmssd / mean;
    out[8].value = sdnn / mean;
  }
  if (n >= opts.min_beats_freq) {
    const BandPowers bp = rr_band_powers(series, opts.interpolation_hz);
    out[9].value = bp.vlf;
    out[10].value = bp.lf;
    out[11].value = bp.hf;
    if (bp.lf > 0.0) out[12].value = bp.hf / bp.lf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sleep
// ---------------------------------------------------------------------------

std::size_t SleepRecord::bed_start() const {
  for (std::size_t i = 0; i < minutes.size(); ++i)
    if (minutes[i] != SleepState::OutOfBed) return i;
  return npos;
}

std::size_t SleepRecord::final_awakening() const {
  for (std::size_t i = minutes.size(); i-- > 0;)
    if (minutes[i] == SleepState::Asleep) return i + 1;
  return npos;
}

SleepRecord sleep_record_for_window(std::span<const SleepInterval> intervals, Timestamp window_start,
                                    std::size_t minutes) {
  SleepRecord rec;
  rec.window_start = window_start;
  rec.minutes.assign(minutes, SleepState::OutOfBed);
  const Timestamp window_end = window_start.plus_minutes(static_cast<std::int64_t>(minutes));
  for (const auto& iv : intervals) {
    if (iv.end <= window_start || iv.start >= window_end) continue;
    // minute m is [start + 60m, start + 60(m+1)); assign by its start instant
    const std::int64_t first = std::max<std::int64_t>(0, (iv.start.seconds - window_start.seconds + 59) / 60);
    const std::int64_t last = std::min<std::int64_t>(static_cast<std::int64_t>(minutes),
                                                     (iv.end.seconds - window_start.seconds + 59) / 60);
    for (std::int64_t m = first; m < last; ++m) rec.minutes[static_cast<std::size_t>(m)] = iv.state;
  }
  return rec;
}

std::optional<double> sleep_regularity_index(std::span<const SleepRecord> records) {
  if (records.size() < 2) return std::nullopt;
  std::size_t agree = 0, total = 0;
  for (std::size_t d = 0; d + 1 < records.size(); ++d) {
    const auto& a = records[d].minutes;
    const auto& b = records[d + 1].minutes;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t m = 0; m < n; ++m) {
      agree += (a[m] == SleepState::Asleep) == (b[m] == SleepState::Asleep);
      ++total;
    }
  }
  if (total == 0) return std::nullopt;
  return 200.0 * static_cast<double>(agree) / static_cast<double>(total) - 100.0;
}

double time_in_bed_minutes(const SleepRecord& record) {
  return static_cast<double>(
      std::count_if(record.minutes.begin(), record.minutes.end(), [](SleepState s) { return s != SleepState::OutOfBed; }));
}

double time_asleep_minutes(const SleepRecord& record) {
  return static_cast<double>(std::count(record.minutes.begin(), record.minutes.end(), SleepState::Asleep));
}

std::optional<double> sleep_efficiency(const SleepRecord& record) {
  const std::size_t bed = record.bed_start();
  if (bed == npos) return std::nullopt;
  const std::size_t wake = record.final_awakening();
  if (wake == npos) return time_in_bed_minutes(record) > 0.0 ? std::optional<double>(0.0) : std::nullopt;
  std::size_t in_bed = 0, asleep = 0;
  for (std::size_t m = bed; m < wake; ++m) {
    if (record.minutes[m] != SleepState::OutOfBed) ++in_bed;
    if (record.minutes[m] == SleepState::Asleep) ++asleep;
  }
  if (in_bed == 0) return std::nullopt;
  return 100.0 * static_cast<double>(asleep) / static_cast<double>(in_bed);
}

// ---------------------------------------------------------------------------
// Phone
// ---------------------------------------------------------------------------

const std::vector<std::string>& phone_feature_names() {
  static const std::vector<std::string> names = {"phone_calls_in",       "phone_calls_out", "phone_calls_missed",
                                                 "phone_sms_in",         "phone_sms_out",   "phone_call_duration_s",
                                                 "phone_screen_on_min"};
  return names;
}

FeatureSlice phone_features(std::span<const PhoneEvent> logs, Timestamp start, Timestamp end) {
  double counts[5] = {0, 0, 0, 0, 0};
  double call_duration = 0.0;
  auto first_in = std::lower_bound(logs.begin(), logs.end(), start,
                                   [](const PhoneEvent& e, Timestamp t) { return e.time < t; });

  // screen state carried into the segment
  bool on = false;
  bool seen_before = false;
  for (auto it = first_in; it != logs.begin();) {
    --it;
    if (it->kind == PhoneEventKind::ScreenUnlock || it->kind == PhoneEventKind::ScreenLock) {
      on = it->kind == PhoneEventKind::ScreenUnlock;
      seen_before = true;
      break;
    }
  }
  if (!seen_before) {
    for (auto it = first_in; it != logs.end() && it->time < end; ++it) {
      if (it->kind == PhoneEventKind::ScreenUnlock) break;
      if (it->kind == PhoneEventKind::ScreenLock) {
        on = true;  // unmatched lock: on since the segment edge
        break;
      }
    }
  }
  std::int64_t on_since = start.seconds;
  std::int64_t screen_s = 0;
  for (auto it = first_in; it != logs.end() && it->time < end; ++it) {
    switch (it->kind) {
      case PhoneEventKind::CallIn: counts[0] += 1; call_duration += it->duration_s; break;
      case PhoneEventKind::CallOut: counts[1] += 1; call_duration += it->duration_s; break;
      case PhoneEventKind::CallMissed: counts[2] += 1; break;
      case PhoneEventKind::SmsIn: counts[3] += 1; break;
      case PhoneEventKind::SmsOut: counts[4] += 1; break;
      case PhoneEventKind::ScreenUnlock:
        if (!on) {
          on = true;
          on_since = it->time.seconds;
        }
        break;
      case PhoneEventKind::ScreenLock:
        if (on) {
          screen_s += it->time.seconds - on_since;
          on = false;
        }
        break;
    }
  }
  if (on) screen_s += end.seconds - on_since;

  const auto& names = phone_feature_names();
  FeatureSlice out;
  for (std::size_t i = 0; i < 5; ++i) out.push_back({names[i], counts[i]});
  out.push_back({names[5], call_duration});
  out.push_back({names[6], static_cast<double>(screen_s) / 60.0});
  return out;
}

// ---------------------------------------------------------------------------
// Location clustering
// ---------------------------------------------------------------------------

double mean_silhouette(std::span<const double> xs, std::span<const double> ys, std::span<const int> labels, int k) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  std::vector<double> sums(static_cast<std::size_t>(k));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (size[own] <= 1) continue;  // singleton scores 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(labels[j])] += std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
    }
    const double a = sums[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c)
      if (c != own && size[c] > 0) b = std::min(b, sums[c] / static_cast<double>(size[c]));
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

namespace {

struct KMeansRun {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> history;
};

KMeansRun kmeans(const std::vector<double>& xs, const std::vector<double>& ys, int k, std::size_t first_center,
                 int max_iter) {
  const std::size_t n = xs.size();
  const auto K = static_cast<std::size_t>(k);
  std::vector<double> cx, cy;
  cx.push_back(xs[first_center]);
  cy.push_back(ys[first_center]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (cx.size() < K) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::hypot(xs[i] - cx.back(), ys[i] - cy.back());
      nearest[i] = std::min(nearest[i], d);
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    cx.push_back(xs[best]);
    cy.push_back(ys[best]);
  }

  KMeansRun run;
  run.labels.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < K; ++c) {
        const double dx = xs[i] - cx[c], dy = ys[i] - cy[c];
        const double d = dx * dx + dy * dy;
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      inertia += bd;
      if (run.labels[i] != best) {
        run.labels[i] = best;
        changed = true;
      }
    }
    run.history.push_back(inertia);
    run.inertia = inertia;
    if (!changed && it > 0) break;
    std::vector<double> sx(K, 0.0), sy(K, 0.0);
    std::vector<std::size_t> cnt(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = static_cast<std::size_t>(run.labels[i]);
      sx[l] += xs[i];
      sy[l] += ys[i];
      ++cnt[l];
    }
    for (std::size_t c = 0; c < K; ++c) {
      if (cnt[c] == 0) continue;  // keeps its previous centre
      cx[c] = sx[c] / static_cast<double>(cnt[c]);
      cy[c] = sy[c] / static_cast<double>(cnt[c]);
    }
  }
  return run;
}

}  // namespace

LocationClusters cluster_locations(std::span<const LocationSample> points, const ClusterOptions& opts) {
  LocationClusters result;
  result.assignment.assign(points.size(), -1);
  if (points.empty()) return result;

  double lat0 = 0.0, lon0 = 0.0;
  for (const auto& p : points) {
    lat0 += p.lat;
    lon0 += p.lon;
  }
  lat0 /= static_cast<double>(points.size());
  lon0 /= static_cast<double>(points.size());
  constexpr double kPi = 3.14159265358979323846;
  const double kx = 111.320 * std::cos(lat0 * kPi / 180.0);
  constexpr double ky = 110.574;
  std::vector<double> px(points.size()), py(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    px[i] = (points[i].lon - lon0) * kx;
    py[i] = (points[i].lat - lat0) * ky;
  }

  // IQR outlier fence on each projected coordinate
  const double qx1 = percentile(px, 25.0), qx3 = percentile(px, 75.0);
  const double qy1 = percentile(py, 25.0), qy3 = percentile(py, 75.0);
  const double fx = 1.5 * (qx3 - qx1), fy = 1.5 * (qy3 - qy1);
  std::vector<std::size_t> kept;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (px[i] < qx1 - fx || px[i] > qx3 + fx || py[i] < qy1 - fy || py[i] > qy3 + fy) continue;
    kept.push_back(i);
    xs.push_back(px[i]);
    ys.push_back(py[i]);
  }
  std::vector<std::pair<double, double>> distinct;
  for (std::size_t i = 0; i < xs.size(); ++i) distinct.emplace_back(xs[i], ys[i]);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const int k_hi = std::min(opts.k_max, static_cast<int>(distinct.size()) - 1);
  if (static_cast<int>(distinct.size()) < opts.k_min + 1 || k_hi < opts.k_min) return result;

  const int restarts = std::clamp(opts.restarts, 1, 50);
  double best_sil = -std::numeric_limits<double>::infinity();
  KMeansRun best_run;
  int best_k = 0;
  for (int k = opts.k_min; k <= k_hi; ++k) {
    KMeansRun best_for_k;
    for (int r = 0; r < restarts; ++r) {
      Rng rng = make_rng(opts.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
      const auto first = static_cast<std::size_t>(rng() % xs.size());
      KMeansRun run = kmeans(xs, ys, k, first, opts.max_iterations);
      if (run.inertia < best_for_k.inertia) best_for_k = std::move(run);
    }
    const double sil = mean_silhouette(xs, ys, best_for_k.labels, k);
    if (sil > best_sil + 1e-12) {
      best_sil = sil;
      best_k = k;
      best_run = std::move(best_for_k);
    }
  }

  // relabel by descending size (ties: lower original id)
  std::vector<std::size_t> size(static_cast<std::size_t>(best_k), 0);
  for (int l : best_run.labels) ++size[static_cast<std::size_t>(l)];
  std::vector<int> order(static_cast<std::size_t>(best_k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return size[static_cast<std::size_t>(a)] > size[static_cast<std::size_t>(b)]; });
  std::vector<int> remap(static_cast<std::size_t>(best_k));
  for (std::size_t i = 0; i < order.size(); ++i) remap[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  for (std::size_t i = 0; i < kept.size(); ++i)
    result.assignment[kept[i]] = remap[static_cast<std::size_t>(best_run.labels[i])];

  result.ok = true;
  result.k = best_k;
  result.silhouette = best_sil;
  result.home = 0;
  result.inertia_history = std::move(best_run.history);
  return result;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& sleep_feature_names() {
  static const std::vector<std::string> names = {"sleep_sri", "sleep_efficiency", "sleep_time_in_bed_min",
                                                 "sleep_time_asleep_min"};
  return names;
}

const std::vector<std::string>& location_feature_names() {
  static const std::vector<std::string> names = {"loc_cluster", "loc_home_fraction"};
  return names;
}

struct Modalities {
  bool rr = false, sleep = false, phone = false, location = false;
};

bool asleep_at(std::span<const SleepInterval> sleep, double t) {
  auto it = std::upper_bound(sleep.begin(), sleep.end(), t,
                             [](double v, const SleepInterval& iv) { return v < static_cast<double>(iv.start.seconds); });
  if (it == sleep.begin()) return false;
  --it;
  return it->state == SleepState::Asleep && t < static_cast<double>(it->end.seconds);
}

void put(Eigen::MatrixXd& m, Eigen::Index row, Eigen::Index& col, const FeatureSlice& slice) {
  for (const auto& f : slice) m(row, col++) = f.value ? *f.value : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

FeatureTable extract_features(const Cohort& cohort, const FeatureOptions& opts) {
  Modalities mod;
  for (const auto& p : cohort.participants) {
    mod.rr |= !p.rr.empty();
    mod.sleep |= !p.sleep.empty();
    mod.phone |= !p.phone.empty();
    mod.location |= !p.locations.empty();
  }
  FeatureTable table;
  for (const auto& ch : cohort.schema.channels)
    for (const auto& s : stat_feature_names()) table.names.push_back(ch + "_" + s);
  if (mod.rr) table.names.insert(table.names.end(), hrv_feature_names().begin(), hrv_feature_names().end());
  if (mod.sleep) table.names.insert(table.names.end(), sleep_feature_names().begin(), sleep_feature_names().end());
  if (mod.phone) table.names.insert(table.names.end(), phone_feature_names().begin(), phone_feature_names().end());
  if (mod.location)
    table.names.insert(table.names.end(), location_feature_names().begin(), location_feature_names().end());

  std::vector<std::vector<Segment>> per_participant;
  std::size_t total = 0;
  for (const auto& p : cohort.participants) {
    per_participant.push_back(segment_windows(p, opts.segment_width_minutes));
    total += per_participant.back().size();
  }
  table.values.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(table.names.size()));
  table.segments.reserve(total);

  Eigen::Index row = 0;
  for (std::size_t pi = 0; pi < cohort.participants.size(); ++pi) {
    const auto& p = cohort.participants[pi];
    const int offset = p.utc_offset_minutes;

    // nights keyed by local day number of the morning they end on
    std::map<std::int64_t, SleepRecord> nights;
    if (mod.sleep && !p.sleep.empty()) {
      const std::int64_t d0 = local_day_number(p.sleep.front().start, offset);
      const std::int64_t d1 = local_day_number(p.sleep.back().end, offset) + 1;
      for (std::int64_t d = d0; d <= d1; ++d) {
        const Timestamp ws = local_midnight(d - 1, offset).plus_minutes(kNightWindowStartHour * 60);
        SleepRecord rec = sleep_record_for_window(p.sleep, ws);
        if (rec.bed_start() != npos) nights.emplace(d, std::move(rec));
      }
    }
    LocationClusters clusters;
    if (mod.location && !p.locations.empty()) {
      ClusterOptions co = opts.clusters;
      co.seed = derive_seed(opts.clusters.seed, {fnv1a64(p.id)});
      clusters = cluster_locations(p.locations, co);
    }

    for (const auto& seg : per_participant[pi]) {
      Eigen::Index col = 0;
      const Timestamp s0 = seg.start, s1 = seg.end();
      for (const auto& stream : p.streams) {
        auto lo = std::lower_bound(stream.times.begin(), stream.times.end(), s0) - stream.times.begin();
        auto hi = std::lower_bound(stream.times.begin(), stream.times.end(), s1) - stream.times.begin();
        put(table.values, row, col,
            stat_features("", std::span<const double>(stream.values.data() + lo, static_cast<std::size_t>(hi - lo))));
      }
      if (mod.rr) {
        RrSeries in_seg;
        const double a = static_cast<double>(s0.seconds), b = static_cast<double>(s1.seconds);
        auto lo = std::lower_bound(p.rr.times.begin(), p.rr.times.end(), a) - p.rr.times.begin();
        for (auto i = static_cast<std::size_t>(lo); i < p.rr.size() && p.rr.times[i] < b; ++i) {
          if (opts.hrv_sleep_only && !asleep_at(p.sleep, p.rr.times[i])) continue;
          in_seg.times.push_back(p.rr.times[i]);
          in_seg.rr_ms.push_back(p.rr.rr_ms[i]);
        }
        FeatureSlice hrv;
        try {
          hrv = hrv_features(validate_rr(in_seg, opts.rr), opts.hrv);
        } catch (const std::runtime_error&) {
          hrv = hrv_features(RrSeries{}, opts.hrv);  // all masked
        }
        put(table.values, row, col, hrv);
      }
      if (mod.sleep) {
        const std::int64_t day = local_day_number(s0, offset);
        const std::int64_t night = local_seconds_of_day(s0, offset) >= 12 * 3600 ? day : day - 1;
        FeatureSlice sl;
        for (const auto& n : sleep_feature_names()) sl.push_back({n, std::nullopt});
        auto it = nights.find(night);
        if (it != nights.end()) {
          sl[1].value = sleep_efficiency(it->second);
          sl[2].value = time_in_bed_minutes(it->second);
          sl[3].value = time_asleep_minutes(it->second);
          std::vector<SleepRecord> run;
          for (std::int64_t d = night; d > night - 7; --d) {
            auto jt = nights.find(d);
            if (jt == nights.end()) break;
            run.insert(run.begin(), jt->second);
          }
          sl[0].value = sleep_regularity_index(run);
        }
        put(table.values, row, col, sl);
      }
      if (mod.phone) put(table.values, row, col, phone_features(p.phone, s0, s1));
      if (mod.location) {
        FeatureSlice loc = {{"loc_cluster", std::nullopt}, {"loc_home_fraction", std::nullopt}};
        auto lo = std::lower_bound(p.locations.begin(), p.locations.end(), s0,
                                   [](const LocationSample& l, Timestamp t) { return l.time < t; }) -
                  p.locations.begin();
        std::map<int, int> votes;
        int n = 0, home = 0;
        for (auto i = static_cast<std::size_t>(lo); i < p.locations.size() && p.locations[i].time < s1; ++i) {
          const int c = clusters.ok ? clusters.assignment[i] : -1;
          ++votes[c];
          ++n;
          home += clusters.ok && c == clusters.home;
        }
        if (n > 0) {
          int best = -1, best_votes = -1;
          for (const auto& [c, v] : votes)
            if (v > best_votes) {
              best = c;
              best_votes = v;
            }
          loc[0].value = best;
          loc[1].value = static_cast<double>(home) / n;
        }
        put(table.values, row, col, loc);
      }
      table.segments.push_back(seg);
      ++row;
    }
  }
  return table;
}

std::string features_to_csv(const FeatureTable& table) {
  std::string out = "participant_id,segment_start,width,study_day,sample_count,coverage";
  for (const auto& n : table.names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    out += s.participant_id + "," + std::to_string(s.start.seconds) + "," + std::to_string(s.width_minutes) + "," +
           std::to_string(s.study_day) + "," + std::to_string(s.sample_count) + "," + format_double(s.coverage);
    for (std::size_t c = 0; c < table.cols(); ++c) {
      out += ",";
      out += format_double(table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    out += "\n";
  }
  return out;
}

FeatureTable features_from_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> meta = {"participant_id", "segment_start", "width", "study_day", "sample_count",
                                         "coverage"};
  if (t.header.size() < meta.size() || !std::equal(meta.begin(), meta.end(), t.header.begin()))
    throw std::runtime_error(path.string() + ":1: unexpected features header");
  FeatureTable table;
  table.names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(meta.size()), t.header.end());
  table.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Segment s;
    s.participant_id = row[0];
    s.start = Timestamp{parse_int(row[1], t.where(r))};
    s.width_minutes = static_cast<int>(parse_int(row[2], t.where(r)));
    s.study_day = static_cast<int>(parse_int(row[3], t.where(r)));
    s.sample_count = static_cast<std::size_t>(parse_int(row[4], t.where(r)));
    s.coverage = parse_double(row[5], t.where(r));
    table.segments.push_back(std::move(s));
    for (std::size_t c = 0; c < table.names.size(); ++c) {
      const auto v = parse_optional_double(row[meta.size() + c], t.where(r));
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          v ? *v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return table;
}

}  // namespace emasched
