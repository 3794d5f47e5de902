#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "emasched/core_data.hpp"
#include "emasched/io.hpp"

using namespace emasched;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("emasched_core_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

std::size_t data_lines(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

const char* kSchema = R"({"schema_version": 1, "channels": ["hr", "steps"], "pa_scale": [5, 25]})";

ParticipantDataset participant_with_samples(std::int64_t first, int minutes) {
  ParticipantDataset p;
  p.id = "p1";
  p.streams.resize(1);
  for (int m = 0; m < minutes; ++m) {
    p.streams[0].times.push_back(Timestamp{first + 60 * m});
    p.streams[0].values.push_back(70.0);
  }
  SchemaConfig schema;
  schema.channels = {"hr"};
  finalize_participant(p, schema);
  return p;
}

FeatureTable two_participant_table() {
  FeatureTable t;
  t.names = {"a", "b"};
  const std::vector<std::pair<std::string, int>> rows = {{"p1", 1}, {"p1", 2}, {"p2", 1}, {"p2", 1}, {"p2", 2}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Segment s;
    s.participant_id = rows[i].first;
    s.study_day = rows[i].second;
    s.start = Timestamp{static_cast<std::int64_t>(i) * 1800};
    t.segments.push_back(s);
  }
  t.values.resize(5, 2);
  t.values << 1.0, 7.0,   //
      3.0, 7.0,           //
      2.0, 7.0,           //
      6.0, 7.0,           //
      10.0, 7.0;
  return t;
}

}  // namespace

TEST(Schema, ParsesAndRoundTrips) {
  const SchemaConfig s = parse_schema(kSchema);
  EXPECT_EQ(s.channels, (std::vector<std::string>{"hr", "steps"}));
  EXPECT_EQ(s.pa_min, 5.0);
  EXPECT_EQ(s.segment_width_minutes, 30);
  EXPECT_EQ(parse_schema(schema_to_json(s)), s);
}

TEST(Schema, ErrorsNameTheField) {
  try {
    parse_schema(R"({"channels": ["hr"], "segment_width_minutes": 25})");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("segment_width_minutes"), std::string::npos);
  }
  EXPECT_THROW(parse_schema(R"({"channels": []})"), std::exception);
  EXPECT_THROW(parse_schema(R"({"channels": ["hr", "hr"]})"), std::exception);
}

TEST(Events, ValidationRules) {
  EmaEvent e;
  e.notification_time = Timestamp{1000};
  EXPECT_NO_THROW(validate_event(e));
  e.response_time = Timestamp{999};
  e.pa_score = 10.0;
  EXPECT_THROW(validate_event(e), std::invalid_argument);
  e.response_time = Timestamp{1000 + 61 * 60};
  EXPECT_THROW(validate_event(e), std::invalid_argument);
  e.response_time = Timestamp{1000 + 60 * 60};
  EXPECT_NO_THROW(validate_event(e));
  e.pa_score = 26.0;
  EXPECT_THROW(validate_event(e), std::invalid_argument);
  e.pa_score.reset();
  EXPECT_THROW(validate_event(e), std::invalid_argument);
}

TEST(Ingest, HeaderOnlyEmaGivesZeroEvents) {
  const auto dir = fresh_dir("empty_ema");
  write(dir / "schema.json", kSchema);
  write(dir / "p1" / "sensors.csv", "timestamp,channel,value\n100,hr,70\n");
  write(dir / "p1" / "ema.csv", "notification_ts,response_ts,pa_score\n");
  const Cohort c = ingest(dir, load_schema(dir / "schema.json"));
  ASSERT_EQ(c.participants.size(), 1u);
  EXPECT_TRUE(c.participants[0].events.empty());
}

TEST(Ingest, ResponseBeforeNotificationIsRejected) {
  const auto dir = fresh_dir("bad_order");
  write(dir / "p1" / "sensors.csv", "timestamp,channel,value\n100,hr,70\n");
  write(dir / "p1" / "ema.csv", "notification_ts,response_ts,pa_score\n1000,900,12\n");
  EXPECT_THROW(ingest(dir, parse_schema(kSchema)), std::exception);
}

TEST(Ingest, ErrorsNameFileAndLine) {
  const auto dir = fresh_dir("bad_row");
  write(dir / "p1" / "sensors.csv", "timestamp,channel,value\n100,hr,70\n160,hr,abc\n");
  write(dir / "p1" / "ema.csv", "notification_ts,response_ts,pa_score\n");
  try {
    ingest(dir, parse_schema(kSchema));
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("sensors.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Ingest, UnknownChannelListsRegistry) {
  const auto dir = fresh_dir("bad_channel");
  write(dir / "p1" / "sensors.csv", "timestamp,channel,value\n100,eda,1\n");
  write(dir / "p1" / "ema.csv", "notification_ts,response_ts,pa_score\n");
  try {
    ingest(dir, parse_schema(kSchema));
    FAIL();
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("eda"), std::string::npos) << msg;
    EXPECT_NE(msg.find("hr"), std::string::npos) << msg;
    EXPECT_NE(msg.find("steps"), std::string::npos) << msg;
  }
}

TEST(Ingest, ThreeParticipantCountsMatchLineCounts) {
  const auto dir = fresh_dir("three");
  std::mt19937 gen(7);
  for (int p = 0; p < 3; ++p) {
    const fs::path pd = dir / ("p" + std::to_string(p));
    std::string sensors = "timestamp,channel,value\n";
    const int n = 20 + 13 * p;
    for (int i = 0; i < n; ++i)
      sensors += std::to_string(1000 + 60 * i) + "," + (gen() % 2 ? "hr" : "steps") + "," + std::to_string(gen() % 100) + "\n";
    std::string ema = "notification_ts,response_ts,pa_score\n";
    for (int i = 0; i <= p; ++i) ema += std::to_string(2000 + 7200 * i) + (i % 2 ? ",," : "," + std::to_string(2600 + 7200 * i) + ",14") + "\n";
    write(pd / "sensors.csv", sensors);
    write(pd / "ema.csv", ema);
  }
  IngestReport report;
  const Cohort c = ingest(dir, parse_schema(kSchema), &report);
  ASSERT_EQ(c.participants.size(), 3u);
  ASSERT_EQ(report.per_participant.size(), 3u);
  for (int p = 0; p < 3; ++p) {
    const fs::path pd = dir / ("p" + std::to_string(p));
    std::size_t samples = 0;
    for (const auto& s : c.participants[p].streams) samples += s.size();
    EXPECT_EQ(samples, data_lines(pd / "sensors.csv"));
    EXPECT_EQ(c.participants[p].events.size(), data_lines(pd / "ema.csv"));
    EXPECT_EQ(report.per_participant[p].sensor_rows, data_lines(pd / "sensors.csv"));
    EXPECT_EQ(report.per_participant[p].ema_rows, data_lines(pd / "ema.csv"));
  }
}

TEST(Ingest, SerializeRoundTripIsExact) {
  Cohort c;
  c.schema = parse_schema(kSchema);
  c.schema.participant_utc_offsets["b"] = -300;
  for (const std::string id : {"a", "b"}) {
    ParticipantDataset p;
    p.id = id;
    p.utc_offset_minutes = c.schema.offset_for(id);
    p.streams.resize(2);
    for (int i = 0; i < 50; ++i) {
      p.streams[i % 2].times.push_back(Timestamp{1709540100 + 60 * i});
      p.streams[i % 2].values.push_back(1.0 / (i + 3));
    }
    EmaEvent answered;
    answered.notification_time = Timestamp{1709541000};
    answered.response_time = Timestamp{1709541600};
    answered.pa_score = 13.5;
    EmaEvent missed;
    missed.notification_time = Timestamp{1709550000};
    p.events = {answered, missed};
    p.rr.times = {1709540100.25, 1709540101.1};
    p.rr.rr_ms = {812.5, 850.0};
    p.phone = {{Timestamp{1709540200}, PhoneEventKind::CallIn, 42.0}, {Timestamp{1709540300}, PhoneEventKind::ScreenUnlock, 0}};
    p.sleep = {{Timestamp{1709500000}, Timestamp{1709510000}, SleepState::Asleep}};
    p.locations = {{Timestamp{1709540100}, 42.36, -71.06}};
    finalize_participant(p, c.schema);
    c.participants.push_back(p);
  }
  const auto dir = fresh_dir("roundtrip");
  write_cohort(c, dir);
  const Cohort back = ingest(dir, load_schema(dir / "schema.json"));
  EXPECT_EQ(back, c);
}

TEST(Segments, SixtyMinutesGiveTwoFullSegments) {
  const auto p = participant_with_samples(parse_iso8601("2024-03-04T10:00:00Z").seconds, 60);
  const auto segs = segment_windows(p, 30);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_FALSE(segs[0].partial());
  EXPECT_FALSE(segs[1].partial());
}

TEST(Segments, FortyFiveMinutesFlagSecondPartial) {
  const std::int64_t t0 = parse_iso8601("2024-03-04T10:00:00Z").seconds;
  const auto p = participant_with_samples(t0, 45);
  const auto segs = segment_windows(p, 30);
  // oracle: grid cells [10:00,10:30) and [10:30,11:00) intersect [10:00, 10:44]
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].start.seconds, t0);
  EXPECT_EQ(segs[1].start.seconds, t0 + 1800);
  EXPECT_FALSE(segs[0].partial());
  EXPECT_TRUE(segs[1].partial());
  EXPECT_DOUBLE_EQ(segs[1].coverage, 0.5);
}

TEST(Segments, DisallowedWidthThrows) {
  const auto p = participant_with_samples(0, 10);
  EXPECT_THROW(segment_windows(p, 25), std::invalid_argument);
  EXPECT_TRUE(segment_windows(ParticipantDataset{}, 30).empty());
}

TEST(Segments, GridAnchoredAtLocalMidnight) {
  auto p = participant_with_samples(parse_iso8601("2024-03-04T10:07:00Z").seconds, 5);
  p.utc_offset_minutes = -10;  // local 09:57
  const auto segs = segment_windows(p, 60);
  ASSERT_FALSE(segs.empty());
  EXPECT_EQ(local_seconds_of_day(segs[0].start, -10) % 3600, 0);
}

TEST(Segments, PartitionProperty) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    ParticipantDataset p;
    p.id = "x";
    p.utc_offset_minutes = static_cast<int>(gen() % 1441) - 720;
    p.streams.resize(2);
    const std::int64_t base = 1700000000 + static_cast<std::int64_t>(gen() % 100000);
    for (auto& st : p.streams) {
      const int n = 1 + static_cast<int>(gen() % 200);
      std::int64_t t = base;
      for (int i = 0; i < n; ++i) {
        t += static_cast<std::int64_t>(gen() % 900);
        st.times.push_back(Timestamp{t});
        st.values.push_back(1.0);
      }
    }
    const int width = kAllowedWidths[gen() % 5];
    const auto segs = segment_windows(p, width);
    for (std::size_t i = 1; i < segs.size(); ++i) EXPECT_EQ(segs[i].start, segs[i - 1].end());
    std::size_t total = 0;
    for (const auto& s : segs) total += s.sample_count;
    std::size_t samples = 0;
    for (const auto& st : p.streams) {
      samples += st.size();
      for (const auto& t : st.times) {
        const auto hits = std::count_if(segs.begin(), segs.end(), [&](const Segment& s) { return s.contains(t); });
        EXPECT_EQ(hits, 1);
      }
    }
    EXPECT_EQ(total, samples);
  }
}

TEST(Normalize, EndpointsMapToZeroAndOne) {
  const FeatureTable t = two_participant_table();
  // day 2 of p2: reference is p2 day 1 rows (values 2 and 6)
  const auto n = normalize_semi_personalized(t, "p2", 2);
  EXPECT_EQ(n.bounds.min[0], 2.0);
  EXPECT_EQ(n.bounds.max[0], 6.0);
  EXPECT_EQ(n.values(2, 0), 0.0);
  EXPECT_EQ(n.values(3, 0), 1.0);
  EXPECT_EQ(n.values(4, 0), 1.0);  // 10 clips
  EXPECT_EQ(n.values(0, 0), 0.0);  // 1 clips
}

TEST(Normalize, DayOneUsesOnlyOtherParticipants) {
  const FeatureTable t = two_participant_table();
  const auto ref = reference_rows(t, "p1", 1);
  for (auto r : ref) EXPECT_NE(t.segments[r].participant_id, "p1");
  EXPECT_EQ(ref.size(), 3u);
  const auto n = normalize_semi_personalized(t, "p1", 1);
  EXPECT_EQ(n.bounds.min[0], 2.0);
  EXPECT_EQ(n.bounds.max[0], 10.0);
}

TEST(Normalize, ConstantFeatureGivesHalf) {
  const FeatureTable t = two_participant_table();
  const auto n = normalize_semi_personalized(t, "p1", 1);
  for (Eigen::Index r = 0; r < n.values.rows(); ++r) EXPECT_EQ(n.values(r, 1), 0.5);
}

TEST(Normalize, AbsentFeatureNamesIt) {
  FeatureTable t = two_participant_table();
  t.values(2, 1) = t.values(3, 1) = t.values(4, 1) = std::nan("");
  try {
    normalize_semi_personalized(t, "p1", 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
  EXPECT_NO_THROW(normalize_semi_personalized(t, "p1", 1, AbsentFeaturePolicy::FallbackToOthers));
  EXPECT_THROW(normalize_semi_personalized(t, "p1", 0), std::invalid_argument);
}

TEST(Normalize, OutputInUnitIntervalAndIdempotent) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0, 5);
  FeatureTable t;
  t.names = {"f0", "f1", "f2"};
  for (int i = 0; i < 60; ++i) {
    Segment s;
    s.participant_id = "p" + std::to_string(i % 4);
    s.study_day = 1 + (i / 4) % 3;
    t.segments.push_back(s);
  }
  t.values.resize(60, 3);
  for (Eigen::Index r = 0; r < 60; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) t.values(r, c) = nd(gen) * (c + 1);
  for (int day = 1; day <= 3; ++day) {
    const auto n = normalize_semi_personalized(t, "p2", day);
    EXPECT_GE(n.values.minCoeff(), 0.0);
    EXPECT_LE(n.values.maxCoeff(), 1.0);
    FeatureTable again = t;
    again.values = n.values;
    const auto ref = reference_rows(t, "p2", day);
    const auto twice = apply_bounds(n.values, compute_bounds(again, ref));
    EXPECT_LE((twice - n.values).cwiseAbs().maxCoeff(), 1e-12);
  }
}
