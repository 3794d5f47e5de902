#include "emasched/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "emasched/io.hpp"
#include "emasched/json_util.hpp"

namespace emasched {

namespace fs = std::filesystem;

bool is_allowed_width(int minutes) {
  return std::find(std::begin(kAllowedWidths), std::end(kAllowedWidths), minutes) != std::end(kAllowedWidths);
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

int SchemaConfig::offset_for(std::string_view participant_id) const {
  auto it = participant_utc_offsets.find(std::string(participant_id));
  return it == participant_utc_offsets.end() ? utc_offset_minutes : it->second;
}

int SchemaConfig::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] == name) return static_cast<int>(i);
  return -1;
}

SchemaConfig parse_schema(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<schema>", e.what());
  }
  SchemaConfig s;
  read_field(j, "schema_version", s.schema_version, "");
  if (s.schema_version != 1) throw ConfigError("schema_version", "unsupported version " + std::to_string(s.schema_version));
  s.channels = require_field<std::vector<std::string>>(j, "channels", "");
  if (s.channels.empty()) throw ConfigError("channels", "registry must not be empty");
  std::set<std::string> uniq(s.channels.begin(), s.channels.end());
  if (uniq.size() != s.channels.size()) throw ConfigError("channels", "duplicate channel name");
  if (j.contains("pa_scale")) {
    const auto& sc = j["pa_scale"];
    if (!sc.is_array() || sc.size() != 2 || !sc[0].is_number() || !sc[1].is_number())
      throw ConfigError("pa_scale", "expected [min, max]");
    s.pa_min = sc[0].get<double>();
    s.pa_max = sc[1].get<double>();
    if (!(s.pa_min < s.pa_max)) throw ConfigError("pa_scale", "min must be below max");
  }
  read_field(j, "utc_offset_minutes", s.utc_offset_minutes, "");
  read_field(j, "participant_utc_offsets", s.participant_utc_offsets, "");
  read_field(j, "segment_width_minutes", s.segment_width_minutes, "");
  if (!is_allowed_width(s.segment_width_minutes))
    throw ConfigError("segment_width_minutes", "must be one of 10, 15, 20, 30, 60");
  read_field(j, "daily_prompts", s.daily_prompts, "");
  if (s.daily_prompts < 1) throw ConfigError("daily_prompts", "must be >= 1");
  std::string fmt = to_string(s.timestamp_format);
  read_field(j, "timestamp_format", fmt, "");
  try {
    s.timestamp_format = parse_timestamp_format(fmt);
  } catch (const std::exception& e) {
    throw ConfigError("timestamp_format", e.what());
  }
  read_field(j, "include_partial_segments", s.include_partial_segments, "");
  return s;
}

std::string schema_to_json(const SchemaConfig& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["channels"] = s.channels;
  j["pa_scale"] = {s.pa_min, s.pa_max};
  j["utc_offset_minutes"] = s.utc_offset_minutes;
  j["participant_utc_offsets"] = s.participant_utc_offsets;
  j["segment_width_minutes"] = s.segment_width_minutes;
  j["daily_prompts"] = s.daily_prompts;
  j["timestamp_format"] = to_string(s.timestamp_format);
  j["include_partial_segments"] = s.include_partial_segments;
  return j.dump(2) + "\n";
}

SchemaConfig load_schema(const fs::path& path) { return parse_schema(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Events and enums
// ---------------------------------------------------------------------------

void validate_event(const EmaEvent& e) {
  if (e.response_time.has_value() != e.pa_score.has_value())
    throw std::invalid_argument("pa_score must be present exactly when response_time is present");
  if (e.response_time) {
    if (*e.response_time < e.notification_time)
      throw std::invalid_argument("response_time precedes notification_time");
    if (*e.response_time > e.notification_time.plus_minutes(kResponseWindowMinutes))
      throw std::invalid_argument("response_time later than 60 minutes after notification");
    if (*e.pa_score < e.scale_min || *e.pa_score > e.scale_max)
      throw std::invalid_argument("pa_score outside scale bounds");
  }
}

std::string to_string(PhoneEventKind k) {
  switch (k) {
    case PhoneEventKind::CallIn: return "call_in";
    case PhoneEventKind::CallOut: return "call_out";
    case PhoneEventKind::CallMissed: return "call_missed";
    case PhoneEventKind::SmsIn: return "sms_in";
    case PhoneEventKind::SmsOut: return "sms_out";
    case PhoneEventKind::ScreenUnlock: return "screen_unlock";
    case PhoneEventKind::ScreenLock: return "screen_lock";
  }
  return "?";
}

PhoneEventKind parse_phone_event_kind(std::string_view s) {
  for (auto k : {PhoneEventKind::CallIn, PhoneEventKind::CallOut, PhoneEventKind::CallMissed, PhoneEventKind::SmsIn,
                 PhoneEventKind::SmsOut, PhoneEventKind::ScreenUnlock, PhoneEventKind::ScreenLock})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown phone event '" + std::string(s) + "'");
}

std::string to_string(SleepState s) {
  switch (s) {
    case SleepState::Asleep: return "asleep";
    case SleepState::Awake: return "awake";
    case SleepState::OutOfBed: return "out_of_bed";
  }
  return "?";
}

SleepState parse_sleep_state(std::string_view s) {
  if (s == "asleep") return SleepState::Asleep;
  if (s == "awake") return SleepState::Awake;
  if (s == "out_of_bed") return SleepState::OutOfBed;
  throw std::invalid_argument("unknown sleep state '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Participants
// ---------------------------------------------------------------------------

int ParticipantDataset::study_day(Timestamp t) const {
  return static_cast<int>(local_day_number(t, utc_offset_minutes) - first_local_day) + 1;
}

int ParticipantDataset::num_study_days() const {
  std::int64_t last = first_local_day;
  bool any = false;
  for (const auto& s : streams)
    if (!s.times.empty()) {
      last = std::max(last, local_day_number(s.times.back(), utc_offset_minutes));
      any = true;
    }
  for (const auto& e : events) {
    last = std::max(last, local_day_number(e.notification_time, utc_offset_minutes));
    any = true;
  }
  return any ? static_cast<int>(last - first_local_day) + 1 : 0;
}

const ParticipantDataset& Cohort::participant(std::string_view id) const {
  for (const auto& p : participants)
    if (p.id == id) return p;
  throw std::out_of_range("no participant '" + std::string(id) + "'");
}

void finalize_participant(ParticipantDataset& p, const SchemaConfig& schema) {
  p.utc_offset_minutes = schema.offset_for(p.id);
  if (p.streams.size() != schema.channels.size()) p.streams.resize(schema.channels.size());
  for (auto& s : p.streams) {
    if (std::is_sorted(s.times.begin(), s.times.end())) continue;
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.times[a] < s.times[b]; });
    SensorStream sorted;
    for (auto i : idx) {
      sorted.times.push_back(s.times[i]);
      sorted.values.push_back(s.values[i]);
    }
    s = std::move(sorted);
  }
  std::stable_sort(p.events.begin(), p.events.end(),
                   [](const EmaEvent& a, const EmaEvent& b) { return a.notification_time < b.notification_time; });
  if (!std::is_sorted(p.rr.times.begin(), p.rr.times.end())) {
    std::vector<std::size_t> idx(p.rr.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p.rr.times[a] < p.rr.times[b]; });
    RrSeries sorted;
    for (auto i : idx) {
      sorted.times.push_back(p.rr.times[i]);
      sorted.rr_ms.push_back(p.rr.rr_ms[i]);
    }
    p.rr = std::move(sorted);
  }
  std::stable_sort(p.phone.begin(), p.phone.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  std::stable_sort(p.sleep.begin(), p.sleep.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  std::stable_sort(p.locations.begin(), p.locations.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });

  std::int64_t first = std::numeric_limits<std::int64_t>::max();
  for (const auto& s : p.streams)
    if (!s.times.empty()) first = std::min(first, local_day_number(s.times.front(), p.utc_offset_minutes));
  for (const auto& e : p.events) first = std::min(first, local_day_number(e.notification_time, p.utc_offset_minutes));
  p.first_local_day = first == std::numeric_limits<std::int64_t>::max() ? 0 : first;

  std::map<int, int> per_day;
  for (const auto& e : p.events) {
    validate_event(e);
    if (++per_day[p.study_day(e.notification_time)] > schema.daily_prompts)
      throw std::invalid_argument("participant " + p.id + ": more than " + std::to_string(schema.daily_prompts) +
                                  " prompts on study day " + std::to_string(p.study_day(e.notification_time)));
  }
}

namespace {

std::string registry_list(const SchemaConfig& schema) {
  std::string out;
  for (const auto& c : schema.channels) out += (out.empty() ? "" : ", ") + c;
  return out;
}

ParticipantDataset read_participant(const fs::path& dir, const SchemaConfig& schema, IngestReport::Counts& counts) {
  ParticipantDataset p;
  p.id = dir.filename().string();
  p.streams.resize(schema.channels.size());
  counts.participant = p.id;

  {
    const CsvTable t = read_csv(dir / "sensors.csv");
    require_header(t, {"timestamp", "channel", "value"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      Timestamp ts;
      try {
        ts = parse_timestamp(row[0], schema.timestamp_format);
      } catch (const std::exception& e) {
        throw std::runtime_error(t.where(r) + ": " + e.what());
      }
      const int ch = schema.channel_index(row[1]);
      if (ch < 0)
        throw std::runtime_error(t.where(r) + ": unknown channel '" + row[1] + "' (registry: " +
                                 registry_list(schema) + ")");
      p.streams[static_cast<std::size_t>(ch)].times.push_back(ts);
      p.streams[static_cast<std::size_t>(ch)].values.push_back(parse_double(row[2], t.where(r)));
    }
    counts.sensor_rows = t.rows.size();
  }
  {
    const CsvTable t = read_csv(dir / "ema.csv");
    require_header(t, {"notification_ts", "response_ts", "pa_score"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      EmaEvent e;
      e.scale_min = schema.pa_min;
      e.scale_max = schema.pa_max;
      try {
        e.notification_time = parse_timestamp(row[0], schema.timestamp_format);
        if (!row[1].empty()) e.response_time = parse_timestamp(row[1], schema.timestamp_format);
      } catch (const std::exception& ex) {
        throw std::runtime_error(t.where(r) + ": " + ex.what());
      }
      e.pa_score = parse_optional_double(row[2], t.where(r));
      try {
        validate_event(e);
      } catch (const std::invalid_argument& ex) {
        throw std::runtime_error(t.where(r) + ": validation error: " + ex.what());
      }
      p.events.push_back(e);
    }
    counts.ema_rows = t.rows.size();
  }
  if (fs::exists(dir / "rr.csv")) {
    const CsvTable t = read_csv(dir / "rr.csv");
    require_header(t, {"timestamp", "rr_ms"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      p.rr.times.push_back(parse_double(t.rows[r][0], t.where(r)));
      p.rr.rr_ms.push_back(parse_double(t.rows[r][1], t.where(r)));
    }
    counts.rr_rows = t.rows.size();
  }
  if (fs::exists(dir / "phone.csv")) {
    const CsvTable t = read_csv(dir / "phone.csv");
    require_header(t, {"timestamp", "event", "duration_s"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      PhoneEvent ev;
      try {
        ev.time = parse_timestamp(t.rows[r][0], schema.timestamp_format);
        ev.kind = parse_phone_event_kind(t.rows[r][1]);
      } catch (const std::exception& ex) {
        throw std::runtime_error(t.where(r) + ": " + ex.what());
      }
      ev.duration_s = t.rows[r][2].empty() ? 0.0 : parse_double(t.rows[r][2], t.where(r));
      p.phone.push_back(ev);
    }
    counts.phone_rows = t.rows.size();
  }
  if (fs::exists(dir / "sleep.csv")) {
    const CsvTable t = read_csv(dir / "sleep.csv");
    require_header(t, {"start_ts", "end_ts", "state"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      SleepInterval iv;
      try {
        iv.start = parse_timestamp(t.rows[r][0], schema.timestamp_format);
        iv.end = parse_timestamp(t.rows[r][1], schema.timestamp_format);
        iv.state = parse_sleep_state(t.rows[r][2]);
      } catch (const std::exception& ex) {
        throw std::runtime_error(t.where(r) + ": " + ex.what());
      }
      if (iv.end < iv.start) throw std::runtime_error(t.where(r) + ": sleep interval ends before it starts");
      p.sleep.push_back(iv);
    }
    counts.sleep_rows = t.rows.size();
  }
  if (fs::exists(dir / "location.csv")) {
    const CsvTable t = read_csv(dir / "location.csv");
    require_header(t, {"timestamp", "lat", "lon"});
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      LocationSample s;
      try {
        s.time = parse_timestamp(t.rows[r][0], schema.timestamp_format);
      } catch (const std::exception& ex) {
        throw std::runtime_error(t.where(r) + ": " + ex.what());
      }
      s.lat = parse_double(t.rows[r][1], t.where(r));
      s.lon = parse_double(t.rows[r][2], t.where(r));
      p.locations.push_back(s);
    }
    counts.location_rows = t.rows.size();
  }
  try {
    finalize_participant(p, schema);
  } catch (const std::invalid_argument& ex) {
    throw std::runtime_error((dir / "ema.csv").string() + ": validation error: " + ex.what());
  }
  return p;
}

}  // namespace

Cohort ingest(const fs::path& dir, const SchemaConfig& schema, IngestReport* report) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "sensors.csv") && fs::exists(entry.path() / "ema.csv"))
      subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  Cohort cohort;
  cohort.schema = schema;
  for (const auto& d : subdirs) {
    IngestReport::Counts counts;
    cohort.participants.push_back(read_participant(d, schema, counts));
    if (report) report->per_participant.push_back(counts);
  }
  return cohort;
}

void write_cohort(const Cohort& cohort, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& schema = cohort.schema;
  const auto fmt = schema.timestamp_format;
  write_file_atomic(dir / "schema.json", schema_to_json(schema));
  for (const auto& p : cohort.participants) {
    const fs::path pd = dir / p.id;
    fs::create_directories(pd);
    {
      // time-major merge across channels, channel order breaks ties
      std::vector<std::size_t> cursor(p.streams.size(), 0);
      std::string out = "timestamp,channel,value\n";
      while (true) {
        int best = -1;
        for (std::size_t c = 0; c < p.streams.size(); ++c) {
          if (cursor[c] >= p.streams[c].size()) continue;
          if (best < 0 || p.streams[c].times[cursor[c]] < p.streams[static_cast<std::size_t>(best)].times[cursor[static_cast<std::size_t>(best)]])
            best = static_cast<int>(c);
        }
        if (best < 0) break;
        const auto b = static_cast<std::size_t>(best);
        out += format_timestamp(p.streams[b].times[cursor[b]], fmt);
        out += ',';
        out += schema.channels[b];
        out += ',';
        out += format_double(p.streams[b].values[cursor[b]]);
        out += '\n';
        ++cursor[b];
      }
      write_file_atomic(pd / "sensors.csv", out);
    }
    {
      std::string out = "notification_ts,response_ts,pa_score\n";
      for (const auto& e : p.events) {
        out += format_timestamp(e.notification_time, fmt) + ",";
        out += (e.response_time ? format_timestamp(*e.response_time, fmt) : "") + ",";
        out += (e.pa_score ? format_double(*e.pa_score) : "") + "\n";
      }
      write_file_atomic(pd / "ema.csv", out);
    }
    if (!p.rr.empty()) {
      std::string out = "timestamp,rr_ms\n";
      for (std::size_t i = 0; i < p.rr.size(); ++i)
        out += format_double(p.rr.times[i]) + "," + format_double(p.rr.rr_ms[i]) + "\n";
      write_file_atomic(pd / "rr.csv", out);
    }
    if (!p.phone.empty()) {
      std::string out = "timestamp,event,duration_s\n";
      for (const auto& ev : p.phone)
        out += format_timestamp(ev.time, fmt) + "," + to_string(ev.kind) + "," + format_double(ev.duration_s) + "\n";
      write_file_atomic(pd / "phone.csv", out);
    }
    if (!p.sleep.empty()) {
      std::string out = "start_ts,end_ts,state\n";
      for (const auto& iv : p.sleep)
        out += format_timestamp(iv.start, fmt) + "," + format_timestamp(iv.end, fmt) + "," + to_string(iv.state) + "\n";
      write_file_atomic(pd / "sleep.csv", out);
    }
    if (!p.locations.empty()) {
      std::string out = "timestamp,lat,lon\n";
      for (const auto& s : p.locations)
        out += format_timestamp(s.time, fmt) + "," + format_double(s.lat) + "," + format_double(s.lon) + "\n";
      write_file_atomic(pd / "location.csv", out);
    }
  }
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

std::vector<Segment> segment_windows(const ParticipantDataset& participant, int width_minutes) {
  if (!is_allowed_width(width_minutes))
    throw std::invalid_argument("disallowed segment width " + std::to_string(width_minutes) +
                                " (allowed: 10, 15, 20, 30, 60)");
  std::optional<Timestamp> lo, hi;
  for (const auto& s : participant.streams) {
    if (s.times.empty()) continue;
    if (!lo || s.times.front() < *lo) lo = s.times.front();
    if (!hi || s.times.back() > *hi) hi = s.times.back();
  }
  if (!lo) return {};

  const int offset = participant.utc_offset_minutes;
  const std::int64_t width_s = std::int64_t{width_minutes} * 60;
  auto cell_start = [&](Timestamp t) {
    const std::int64_t day = local_day_number(t, offset);
    const Timestamp midnight = local_midnight(day, offset);
    return Timestamp{midnight.seconds + ((t.seconds - midnight.seconds) / width_s) * width_s};
  };
  const Timestamp first = cell_start(*lo);
  const std::int64_t n = (cell_start(*hi).seconds - first.seconds) / width_s + 1;

  std::vector<Segment> segs(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& s = segs[static_cast<std::size_t>(i)];
    s.participant_id = participant.id;
    s.start = Timestamp{first.seconds + i * width_s};
    s.width_minutes = width_minutes;
    s.study_day = participant.study_day(s.start);
  }
  // minute-occupancy bitmap per segment
  std::vector<std::vector<bool>> minutes(segs.size(), std::vector<bool>(static_cast<std::size_t>(width_minutes), false));
  for (const auto& st : participant.streams) {
    for (const auto& t : st.times) {
      const auto idx = static_cast<std::size_t>((t.seconds - first.seconds) / width_s);
      auto& seg = segs[idx];
      ++seg.sample_count;
      minutes[idx][static_cast<std::size_t>((t.seconds - seg.start.seconds) / 60)] = true;
    }
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto covered = std::count(minutes[i].begin(), minutes[i].end(), true);
    segs[i].coverage = static_cast<double>(covered) / width_minutes;
  }
  return segs;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

std::string registry_hash(std::span<const std::string> names) {
  std::uint64_t h = fnv1a64("registry");
  for (const auto& n : names) {
    h = fnv1a64(n, h);
    h = fnv1a64("\x1f", h);
  }
  return hex64(h);
}

std::string FeatureTable::registry_hash() const { return emasched::registry_hash(names); }

std::vector<std::size_t> reference_rows(const FeatureTable& table, std::string_view test_participant,
                                        int study_day) {
  if (study_day < 1) throw std::invalid_argument("study_day must be >= 1");
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    if (study_day == 1) {
      if (s.participant_id != test_participant) rows.push_back(r);
    } else if (s.participant_id == test_participant && s.study_day < study_day) {
      rows.push_back(r);
    }
  }
  return rows;
}

FeatureBounds compute_bounds(const FeatureTable& table, std::span<const std::size_t> rows,
                             AbsentFeaturePolicy policy, std::span<const std::size_t> fallback_rows) {
  const std::size_t nf = table.cols();
  FeatureBounds b;
  b.min.assign(nf, 0.0);
  b.max.assign(nf, 0.0);
  b.fill.assign(nf, 0.5);
  for (std::size_t f = 0; f < nf; ++f) {
    auto scan = [&](std::span<const std::size_t> rs, double& lo, double& hi, double& sum, std::size_t& n) {
      lo = std::numeric_limits<double>::infinity();
      hi = -lo;
      sum = 0.0;
      n = 0;
      for (auto r : rs) {
        const double v = table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++n;
      }
    };
    double lo, hi, sum;
    std::size_t n;
    scan(rows, lo, hi, sum, n);
    if (n == 0) {
      if (policy == AbsentFeaturePolicy::Error)
        throw std::invalid_argument("feature '" + table.names[f] + "' absent from reference data");
      scan(fallback_rows, lo, hi, sum, n);
      if (n == 0) continue;  // absent everywhere: stays inert at 0.5
    }
    b.min[f] = lo;
    b.max[f] = hi;
    const double mean = sum / static_cast<double>(n);
    b.fill[f] = hi > lo ? (mean - lo) / (hi - lo) : 0.5;
  }
  return b;
}

namespace {
inline double scale_one(double v, double lo, double hi, double fill) {
  if (std::isnan(v)) return fill;
  if (!(hi > lo)) return 0.5;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}
}  // namespace

Eigen::MatrixXd apply_bounds(const Eigen::MatrixXd& values, const FeatureBounds& bounds) {
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const auto f = static_cast<std::size_t>(c);
    for (Eigen::Index r = 0; r < values.rows(); ++r)
      out(r, c) = scale_one(values(r, c), bounds.min[f], bounds.max[f], bounds.fill[f]);
  }
  return out;
}

Eigen::RowVectorXd apply_bounds_row(const Eigen::RowVectorXd& row, const FeatureBounds& bounds) {
  Eigen::RowVectorXd out(row.size());
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    const auto f = static_cast<std::size_t>(c);
    out(c) = scale_one(row(c), bounds.min[f], bounds.max[f], bounds.fill[f]);
  }
  return out;
}

NormalizedFeatures normalize_semi_personalized(const FeatureTable& table, std::string_view test_participant,
                                               int study_day, AbsentFeaturePolicy policy) {
  const auto ref = reference_rows(table, test_participant, study_day);
  std::vector<std::size_t> others;
  if (policy == AbsentFeaturePolicy::FallbackToOthers) others = reference_rows(table, test_participant, 1);
  NormalizedFeatures out;
  out.bounds = compute_bounds(table, ref, policy, others);
  out.values = apply_bounds(table.values, out.bounds);
  return out;
}

}  // namespace emasched
