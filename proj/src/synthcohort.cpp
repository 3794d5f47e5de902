#include "emasched/synthcohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "emasched/io.hpp"
#include "emasched/rng.hpp"

namespace fs = std::filesystem;

namespace emasched {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMeanResponseDelayMinutes = 8.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

void CohortSpec::validate() const {
  auto fail = [](const char* field, const char* what) { throw ConfigError(std::string("cohort.") + field, what); };
  if (participants < 1) fail("participants", "must be >= 1");
  if (days < 1) fail("days", "must be >= 1");
  if (!is_allowed_width(segment_width_minutes)) fail("segment_width_minutes", "must be one of 10, 15, 20, 30, 60");
  if (!(pa_max > pa_min)) fail("pa_max", "must exceed pa_min");
  if (!(pa_between_sd >= 0.0)) fail("pa_between_sd", "must be >= 0");
  if (!(pa_within_sd > 0.0)) fail("pa_within_sd", "must be > 0");
  if (!(ar_phi >= 0.0 && ar_phi < 1.0)) fail("ar_phi", "must be in [0, 1)");
  if (!(base_rate > 0.0 && base_rate < 1.0)) fail("base_rate", "must be in (0, 1)");
  if (!(propensity_sd >= 0.0)) fail("propensity_sd", "must be >= 0");
  if (!(busy_fraction >= 0.0 && busy_fraction < 1.0)) fail("busy_fraction", "must be in [0, 1)");
  if (!(busy_mean_minutes >= kTruthStepMinutes)) fail("busy_mean_minutes", "must be >= 5");
  if (wake_minute < 0 || sleep_minute <= wake_minute || sleep_minute > 24 * 60 || wake_minute % kTruthStepMinutes)
    fail("sleep_minute", "sensing span must be a 5-minute aligned part of the day");
  if (daily_prompts < 1) fail("daily_prompts", "must be >= 1");
  if (prompt_window_minutes < 1 || prompt_window_start_minute < wake_minute ||
      prompt_window_start_minute + daily_prompts * prompt_window_minutes > sleep_minute)
    fail("prompt_window_minutes", "prompt windows must lie inside the sensing span");
  try {
    parse_date(start_date);
  } catch (const std::exception& e) {
    fail("start_date", "expected YYYY-MM-DD");
  }
}

Json cohort_spec_to_json(const CohortSpec& s) {
  return Json{{"participants", s.participants},
              {"days", s.days},
              {"segment_width_minutes", s.segment_width_minutes},
              {"pa_min", s.pa_min},
              {"pa_max", s.pa_max},
              {"pa_mean", s.pa_mean},
              {"pa_between_sd", s.pa_between_sd},
              {"pa_within_sd", s.pa_within_sd},
              {"pa_skew", s.pa_skew},
              {"ar_phi", s.ar_phi},
              {"coupling", s.coupling},
              {"base_rate", s.base_rate},
              {"propensity_sd", s.propensity_sd},
              {"busy_effect", s.busy_effect},
              {"busy_fraction", s.busy_fraction},
              {"busy_mean_minutes", s.busy_mean_minutes},
              {"signal_strength", s.signal_strength},
              {"wake_minute", s.wake_minute},
              {"sleep_minute", s.sleep_minute},
              {"daily_prompts", s.daily_prompts},
              {"prompt_window_start_minute", s.prompt_window_start_minute},
              {"prompt_window_minutes", s.prompt_window_minutes},
              {"start_date", s.start_date},
              {"utc_offset_minutes", s.utc_offset_minutes},
              {"include_rr", s.include_rr},
              {"include_phone", s.include_phone},
              {"include_sleep", s.include_sleep},
              {"include_location", s.include_location},
              {"seed", s.seed}};
}

CohortSpec cohort_spec_from_json(const Json& j, std::string_view path) {
  CohortSpec s;
  if (!j.is_object()) throw ConfigError(std::string(path), "expected an object");
  static const std::vector<std::string> known = {
      "participants", "days", "segment_width_minutes", "pa_min", "pa_max", "pa_mean", "pa_between_sd",
      "pa_within_sd", "pa_skew", "ar_phi", "coupling", "base_rate", "propensity_sd", "busy_effect",
      "busy_fraction", "busy_mean_minutes", "signal_strength", "wake_minute", "sleep_minute", "daily_prompts",
      "prompt_window_start_minute", "prompt_window_minutes", "start_date", "utc_offset_minutes", "include_rr",
      "include_phone", "include_sleep", "include_location", "seed"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError(join_path(path, k), "unknown field");
  read_field(j, "participants", s.participants, path);
  read_field(j, "days", s.days, path);
  read_field(j, "segment_width_minutes", s.segment_width_minutes, path);
  read_field(j, "pa_min", s.pa_min, path);
  read_field(j, "pa_max", s.pa_max, path);
  read_field(j, "pa_mean", s.pa_mean, path);
  read_field(j, "pa_between_sd", s.pa_between_sd, path);
  read_field(j, "pa_within_sd", s.pa_within_sd, path);
  read_field(j, "pa_skew", s.pa_skew, path);
  read_field(j, "ar_phi", s.ar_phi, path);
  read_field(j, "coupling", s.coupling, path);
  read_field(j, "base_rate", s.base_rate, path);
  read_field(j, "propensity_sd", s.propensity_sd, path);
  read_field(j, "busy_effect", s.busy_effect, path);
  read_field(j, "busy_fraction", s.busy_fraction, path);
  read_field(j, "busy_mean_minutes", s.busy_mean_minutes, path);
  read_field(j, "signal_strength", s.signal_strength, path);
  read_field(j, "wake_minute", s.wake_minute, path);
  read_field(j, "sleep_minute", s.sleep_minute, path);
  read_field(j, "daily_prompts", s.daily_prompts, path);
  read_field(j, "prompt_window_start_minute", s.prompt_window_start_minute, path);
  read_field(j, "prompt_window_minutes", s.prompt_window_minutes, path);
  read_field(j, "start_date", s.start_date, path);
  read_field(j, "utc_offset_minutes", s.utc_offset_minutes, path);
  read_field(j, "include_rr", s.include_rr, path);
  read_field(j, "include_phone", s.include_phone, path);
  read_field(j, "include_sleep", s.include_sleep, path);
  read_field(j, "include_location", s.include_location, path);
  read_field(j, "seed", s.seed, path);
  s.validate();
  return s;
}

const TruthPoint* ParticipantTruth::at(Timestamp t) const {
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](Timestamp v, const TruthPoint& p) { return v < p.time; });
  if (it == points.begin()) return nullptr;
  --it;
  if (t >= it->time.plus_minutes(kTruthStepMinutes)) return nullptr;
  return &*it;
}

double calibrate_alpha(const CohortSpec& spec) {
  const double s = std::sqrt(spec.propensity_sd * spec.propensity_sd + spec.coupling * spec.coupling);
  auto marginal = [&](double alpha) {
    // trapezoid over the combined normal logit spread
    double total = 0.0, wsum = 0.0;
    for (int i = -800; i <= 800; ++i) {
      const double u = i * 0.01;
      const double w = std::exp(-0.5 * u * u) * (i == -800 || i == 800 ? 0.5 : 1.0);
      total += w * ((1.0 - spec.busy_fraction) * logistic(alpha + s * u) +
                    spec.busy_fraction * logistic(alpha + spec.busy_effect + s * u));
      wsum += w;
    }
    return total / wsum;
  };
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (marginal(mid) < spec.base_rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

std::string participant_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%03d", i + 1);
  return buf;
}

struct DayState {
  std::vector<double> z;  // per 5-minute step
  std::vector<int> busy;
};

DayState simulate_day(const CohortSpec& spec, int steps, Rng& rng) {
  DayState d;
  const double innovation = std::sqrt(1.0 - spec.ar_phi * spec.ar_phi);
  const double p_exit = kTruthStepMinutes / spec.busy_mean_minutes;
  const double p_enter = spec.busy_fraction > 0.0 ? p_exit * spec.busy_fraction / (1.0 - spec.busy_fraction) : 0.0;
  double z = normal(rng);
  int busy = uniform01(rng) < spec.busy_fraction ? 1 : 0;
  for (int k = 0; k < steps; ++k) {
    if (k > 0) {
      z = spec.ar_phi * z + innovation * normal(rng);
      busy = busy ? (uniform01(rng) < p_exit ? 0 : 1) : (uniform01(rng) < p_enter ? 1 : 0);
    }
    d.z.push_back(z);
    d.busy.push_back(busy);
  }
  return d;
}

void add_rr(ParticipantDataset& p, Timestamp day_midnight, const CohortSpec& spec, const std::vector<double>& hr_by_minute,
            Rng& rng) {
  // 2-minute recordings every 30 minutes across the sensing span
  for (int m = spec.wake_minute; m + 2 < spec.sleep_minute; m += 30) {
    double t = static_cast<double>(day_midnight.plus_minutes(m + 5).seconds);
    const double end = t + 120.0;
    const double hr = hr_by_minute[static_cast<std::size_t>(m - spec.wake_minute)];
    while (t < end) {
      const double base = 60000.0 / std::max(hr, 40.0);
      double rr = base + 25.0 * std::sin(2.0 * kPi * 0.25 * t) + 15.0 * std::sin(2.0 * kPi * 0.1 * t) + normal(rng, 0.0, 8.0);
      rr = std::clamp(rr, 300.0, 2000.0);
      double recorded = rr;
      if (uniform01(rng) < 0.01) recorded = rr * 2.0;  // missed beat artifact
      p.rr.times.push_back(round_to(t, 0.001));
      p.rr.rr_ms.push_back(round_to(recorded, 0.1));
      t += rr / 1000.0;
    }
  }
}

void add_phone(ParticipantDataset& p, Timestamp day_midnight, const CohortSpec& spec, const DayState& day, Rng& rng) {
  std::int64_t free_from = 0;
  const int steps = (spec.sleep_minute - spec.wake_minute) / kTruthStepMinutes;
  for (int k = 0; k < steps; ++k) {
    const Timestamp t0 = day_midnight.plus_minutes(spec.wake_minute + k * kTruthStepMinutes);
    const bool busy = day.busy[static_cast<std::size_t>(k)] != 0;
    if (t0.seconds >= free_from && uniform01(rng) < (busy ? 0.05 : 0.15)) {
      const Timestamp on = t0.plus_seconds(static_cast<std::int64_t>(uniform01(rng) * 60));
      const Timestamp off = on.plus_seconds(60 + static_cast<std::int64_t>(uniform01(rng) * 540));
      p.phone.push_back({on, PhoneEventKind::ScreenUnlock, 0.0});
      p.phone.push_back({off, PhoneEventKind::ScreenLock, 0.0});
      free_from = off.seconds + 1;
    }
    const double u = uniform01(rng);
    const Timestamp te = t0.plus_seconds(150);
    if (u < 0.004) p.phone.push_back({te, PhoneEventKind::CallIn, round_to(30.0 + uniform01(rng) * 570.0, 1.0)});
    else if (u < 0.008) p.phone.push_back({te, PhoneEventKind::CallOut, round_to(30.0 + uniform01(rng) * 570.0, 1.0)});
    else if (u < 0.011) p.phone.push_back({te, PhoneEventKind::CallMissed, 0.0});
    else if (u < 0.021) p.phone.push_back({te, PhoneEventKind::SmsIn, 0.0});
    else if (u < 0.028) p.phone.push_back({te, PhoneEventKind::SmsOut, 0.0});
  }
}

void add_night(ParticipantDataset& p, Timestamp evening_midnight, Rng& rng) {
  // bed around 23:15, asleep until about 06:45 the next morning
  const Timestamp bed = evening_midnight.plus_minutes(23 * 60 + 15 + static_cast<std::int64_t>(normal(rng, 0.0, 20.0)));
  const Timestamp onset = bed.plus_minutes(5 + static_cast<std::int64_t>(uniform01(rng) * 25.0));
  const Timestamp wake = evening_midnight.plus_minutes(24 * 60 + 6 * 60 + 45 + static_cast<std::int64_t>(normal(rng, 0.0, 20.0)));
  const Timestamp out = wake.plus_minutes(2 + static_cast<std::int64_t>(uniform01(rng) * 10.0));
  p.sleep.push_back({bed, onset, SleepState::Awake});
  Timestamp cur = onset;
  const int bouts = static_cast<int>(uniform01(rng) * 3.0);
  for (int b = 0; b < bouts; ++b) {
    const Timestamp bout = cur.plus_minutes(60 + static_cast<std::int64_t>(uniform01(rng) * 120.0));
    const Timestamp bout_end = bout.plus_minutes(5 + static_cast<std::int64_t>(uniform01(rng) * 10.0));
    if (bout_end >= wake) break;
    p.sleep.push_back({cur, bout, SleepState::Asleep});
    p.sleep.push_back({bout, bout_end, SleepState::Awake});
    cur = bout_end;
  }
  p.sleep.push_back({cur, wake, SleepState::Asleep});
  p.sleep.push_back({wake, out, SleepState::Awake});
}

struct Place {
  double lat, lon;
};

void add_locations(ParticipantDataset& p, Timestamp day_midnight, const CohortSpec& spec, const DayState& day,
                   const std::vector<Place>& places, Rng& rng) {
  std::size_t place = 0;
  for (int m = spec.wake_minute; m < spec.sleep_minute; m += 10) {
    const auto k = static_cast<std::size_t>((m - spec.wake_minute) / kTruthStepMinutes);
    if ((m - spec.wake_minute) % 60 == 0) {
      if (day.busy[k]) place = 1;
      else if (uniform01(rng) < 0.5) place = 0;
      else place = 2 + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(places.size() - 2));
    }
    p.locations.push_back({day_midnight.plus_minutes(m), round_to(places[place].lat + normal(rng, 0.0, 2e-4), 1e-6),
                           round_to(places[place].lon + normal(rng, 0.0, 2e-4), 1e-6)});
  }
}

}  // namespace

SyntheticCohort synthesize_cohort(const CohortSpec& spec) {
  spec.validate();
  SyntheticCohort out;
  auto& schema = out.cohort.schema;
  schema.channels = {"hr", "steps", "temp", "eda"};
  schema.pa_min = spec.pa_min;
  schema.pa_max = spec.pa_max;
  schema.utc_offset_minutes = spec.utc_offset_minutes;
  schema.segment_width_minutes = spec.segment_width_minutes;
  schema.daily_prompts = spec.daily_prompts;
  schema.timestamp_format = TimestampFormat::Epoch;

  const double alpha = calibrate_alpha(spec);
  out.truth.alpha = alpha;
  const std::int64_t first_day = parse_date(spec.start_date);
  const double s = spec.signal_strength;
  // the truth timeline extends an hour past the sensing span to cover late responses
  const int steps = (spec.sleep_minute - spec.wake_minute + kResponseWindowMinutes) / kTruthStepMinutes;
  const int sensed_minutes = spec.sleep_minute - spec.wake_minute;

  for (int pi = 0; pi < spec.participants; ++pi) {
    Rng rng = make_rng(spec.seed, {static_cast<std::uint64_t>(pi)});
    ParticipantDataset p;
    p.id = participant_id(pi);
    p.utc_offset_minutes = spec.utc_offset_minutes;
    p.streams.resize(schema.channels.size());
    ParticipantTruth truth;

    const double b_p = normal(rng, 0.0, spec.pa_between_sd);
    const double prop = normal(rng, 0.0, spec.propensity_sd);
    const double hr_base = normal(rng, 70.0, 5.0);
    const double temp_base = normal(rng, 33.0, 0.5);
    const double eda_base = std::max(0.5, normal(rng, 2.0, 0.5));
    std::vector<Place> places;
    const double lat0 = 40.0 + uniform01(rng), lon0 = -75.0 + uniform01(rng);
    for (int k = 0; k < 8; ++k)
      places.push_back(k == 0 ? Place{lat0, lon0} : Place{lat0 + normal(rng, 0.0, 0.05), lon0 + normal(rng, 0.0, 0.05)});

    if (spec.include_sleep) add_night(p, local_midnight(first_day - 1, spec.utc_offset_minutes), rng);

    for (int d = 0; d < spec.days; ++d) {
      const Timestamp midnight = local_midnight(first_day + d, spec.utc_offset_minutes);
      const DayState day = simulate_day(spec, steps, rng);
      for (int k = 0; k < steps; ++k) {
        TruthPoint tp;
        tp.time = midnight.plus_minutes(spec.wake_minute + k * kTruthStepMinutes);
        tp.z = day.z[static_cast<std::size_t>(k)];
        tp.busy = day.busy[static_cast<std::size_t>(k)];
        const double shaped = tp.z + spec.pa_skew * (tp.z * tp.z - 1.0) / 2.0;
        tp.latent_pa = std::clamp(spec.pa_mean + b_p + spec.pa_within_sd * shaped, spec.pa_min, spec.pa_max);
        tp.logit_offset = alpha + prop;
        tp.p_resp = logistic(tp.logit_offset + spec.coupling * tp.z + spec.busy_effect * tp.busy);
        truth.points.push_back(tp);
      }
      const std::size_t day_base = truth.points.size() - static_cast<std::size_t>(steps);

      std::vector<double> hr_by_minute(static_cast<std::size_t>(sensed_minutes));
      for (int m = 0; m < sensed_minutes; ++m) {
        const auto k = static_cast<std::size_t>(m / kTruthStepMinutes);
        const double z = day.z[k], az = std::abs(z);
        const int busy = day.busy[k];
        const double clock = 2.0 * kPi * (spec.wake_minute + m - 15 * 60) / (24.0 * 60.0);
        const Timestamp t = midnight.plus_minutes(spec.wake_minute + m);
        const double hr = hr_base + 3.0 * std::cos(clock) + 6.0 * s * z + 3.0 * s * az + 6.0 * busy + normal(rng, 0.0, 3.0);
        const double step_count = std::max(0.0, std::round(30.0 + 70.0 * busy + 10.0 * s * z + normal(rng, 0.0, 20.0)));
        const double temp = temp_base + 0.3 * std::cos(clock) - 0.3 * s * z + 0.3 * s * az + normal(rng, 0.0, 0.15);
        const double eda = std::max(0.05, eda_base + 0.25 * s * z + 0.5 * s * az + normal(rng, 0.0, 0.2));
        const double values[4] = {round_to(hr, 0.01), step_count, round_to(temp, 0.01), round_to(eda, 0.001)};
        for (std::size_t c = 0; c < 4; ++c) {
          p.streams[c].times.push_back(t);
          p.streams[c].values.push_back(values[c]);
        }
        hr_by_minute[static_cast<std::size_t>(m)] = hr;
      }

      for (int w = 0; w < spec.daily_prompts; ++w) {
        const int start = spec.prompt_window_start_minute + w * spec.prompt_window_minutes;
        const int minute = start + static_cast<int>(uniform01(rng) * spec.prompt_window_minutes);
        EmaEvent e;
        e.scale_min = spec.pa_min;
        e.scale_max = spec.pa_max;
        e.notification_time = midnight.plus_minutes(minute);
        const auto& at_prompt = truth.points[day_base + static_cast<std::size_t>((minute - spec.wake_minute) / kTruthStepMinutes)];
        const bool responded = uniform01(rng) < at_prompt.p_resp;
        const int delay = std::min(kResponseWindowMinutes,
                                   1 + static_cast<int>(-kMeanResponseDelayMinutes * std::log1p(-uniform01(rng))));
        if (responded) {
          e.response_time = e.notification_time.plus_minutes(delay);
          const auto& at_resp =
              truth.points[day_base + static_cast<std::size_t>((minute + delay - spec.wake_minute) / kTruthStepMinutes)];
          e.pa_score = std::clamp(std::round(at_resp.latent_pa), spec.pa_min, spec.pa_max);
        }
        truth.responses.push_back({e.notification_time, at_prompt.p_resp, responded});
        p.events.push_back(e);
      }

      if (spec.include_rr) add_rr(p, midnight, spec, hr_by_minute, rng);
      if (spec.include_phone) add_phone(p, midnight, spec, day, rng);
      if (spec.include_sleep) add_night(p, midnight, rng);
      if (spec.include_location) add_locations(p, midnight, spec, day, places, rng);
    }
    finalize_participant(p, schema);
    out.truth.participants.emplace(p.id, std::move(truth));
    out.cohort.participants.push_back(std::move(p));
  }
  return out;
}

SyntheticCohort generate_cohort(const CohortSpec& spec, const fs::path& dir) {
  SyntheticCohort sc = synthesize_cohort(spec);
  write_cohort(sc.cohort, dir);
  for (const auto& [id, truth] : sc.truth.participants) {
    std::string pa = "timestamp,latent_pa,z,busy,logit_offset,p_resp\n";
    for (const auto& t : truth.points)
      pa += std::to_string(t.time.seconds) + "," + format_double(t.latent_pa) + "," + format_double(t.z) + "," +
            std::to_string(t.busy) + "," + format_double(t.logit_offset) + "," + format_double(t.p_resp) + "\n";
    write_file_atomic(dir / id / "truth_pa.csv", pa);
    std::string resp = "notification_ts,p_resp,responded\n";
    for (const auto& r : truth.responses)
      resp += std::to_string(r.notification_time.seconds) + "," + format_double(r.p_resp) + "," +
              (r.responded ? "1" : "0") + "\n";
    write_file_atomic(dir / id / "truth_resp.csv", resp);
  }
  Json snapshot{{"schema_version", 1}, {"cohort_spec", cohort_spec_to_json(spec)}, {"alpha", sc.truth.alpha}};
  write_file_atomic(dir / "cohort_spec.json", snapshot.dump(2) + "\n");
  return sc;
}

CohortTruth cohort_truth(const fs::path& dir) {
  const fs::path spec_path = dir / "cohort_spec.json";
  if (!fs::exists(spec_path)) throw std::runtime_error(spec_path.string() + ": missing truth snapshot");
  CohortTruth out;
  const Json snap = Json::parse(read_text_file(spec_path));
  out.alpha = require_field<double>(snap, "alpha", "");
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& sd : subdirs) {
    const fs::path pa_path = sd / "truth_pa.csv", resp_path = sd / "truth_resp.csv";
    if (!fs::exists(pa_path) || !fs::exists(resp_path))
      throw std::runtime_error(sd.string() + ": missing truth_pa.csv or truth_resp.csv");
    ParticipantTruth truth;
    const CsvTable pa = read_csv(pa_path);
    require_header(pa, {"timestamp", "latent_pa", "z", "busy", "logit_offset", "p_resp"});
    for (std::size_t r = 0; r < pa.rows.size(); ++r) {
      const auto& row = pa.rows[r];
      TruthPoint t;
      t.time = Timestamp{parse_int(row[0], pa.where(r))};
      t.latent_pa = parse_double(row[1], pa.where(r));
      t.z = parse_double(row[2], pa.where(r));
      t.busy = static_cast<int>(parse_int(row[3], pa.where(r)));
      t.logit_offset = parse_double(row[4], pa.where(r));
      t.p_resp = parse_double(row[5], pa.where(r));
      truth.points.push_back(t);
    }
    const CsvTable resp = read_csv(resp_path);
    require_header(resp, {"notification_ts", "p_resp", "responded"});
    for (std::size_t r = 0; r < resp.rows.size(); ++r) {
      const auto& row = resp.rows[r];
      truth.responses.push_back({Timestamp{parse_int(row[0], resp.where(r))}, parse_double(row[1], resp.where(r)),
                                 parse_int(row[2], resp.where(r)) != 0});
    }
    out.participants.emplace(sd.filename().string(), std::move(truth));
  }
  return out;
}

}  // namespace emasched
