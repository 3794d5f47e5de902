#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "emasched/io.hpp"
#include "emasched/labeling.hpp"

using namespace emasched;

namespace {

const std::int64_t kDay = 1709510400;  // 2024-03-04T00:00:00Z

Timestamp at(int hour, int minute) { return Timestamp{kDay + hour * 3600 + minute * 60}; }

std::vector<Segment> grid(int width, int hours = 24) {
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

EmaEvent answered(Timestamp n, Timestamp r, double pa) {
  EmaEvent e;
  e.notification_time = n;
  e.response_time = r;
  e.pa_score = pa;
  return e;
}

EmaEvent missed(Timestamp n) {
  EmaEvent e;
  e.notification_time = n;
  return e;
}

const LabeledSegment& at_start(const std::vector<LabeledSegment>& ls, Timestamp t) {
  for (const auto& l : ls)
    if (l.segment.start == t) return l;
  throw std::runtime_error("no segment");
}

std::int64_t overlap(const Segment& s, std::int64_t lo, std::int64_t hi) {
  return std::max<std::int64_t>(0, std::min(s.end().seconds, hi) - std::max(s.start.seconds, lo));
}

bool half_covered(const Segment& s, std::int64_t lo, std::int64_t hi) {
  return overlap(s, lo, hi) > 0 && 2 * overlap(s, lo, hi) >= s.width_minutes * 60LL;
}

struct Expected {
  ReceptivityLabel label = ReceptivityLabel::Unlabeled;
  std::optional<double> pa;
};

// Rules applied with Receptive first; NonReceptive only fills unlabeled cells.
std::vector<Expected> oracle_receptive_first(const std::vector<Segment>& segs, const std::vector<EmaEvent>& evs, int w) {
  std::vector<Expected> out(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    std::int64_t best = -1;
    for (const auto& e : evs) {
      if (!e.responded()) continue;
      const std::int64_t hi = e.response_time->seconds;
      if (!half_covered(segs[i], hi - w * 60LL, hi)) continue;
      const std::int64_t d = std::llabs(2 * hi - segs[i].start.seconds - segs[i].end().seconds);
      if (best < 0 || d < best) {
        best = d;
        out[i] = {ReceptivityLabel::Receptive, e.pa_score};
      }
    }
  }
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (const auto& e : evs)
      if (!e.responded() && out[i].label == ReceptivityLabel::Unlabeled &&
          half_covered(segs[i], e.notification_time.seconds, e.notification_time.seconds + 3600))
        out[i].label = ReceptivityLabel::NonReceptive;
  return out;
}

// Same rules in the opposite order: NonReceptive first, Receptive overwrites.
std::vector<Expected> oracle_nonreceptive_first(const std::vector<Segment>& segs, const std::vector<EmaEvent>& evs,
                                                int w) {
  std::vector<Expected> out(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (const auto& e : evs)
      if (!e.responded() && half_covered(segs[i], e.notification_time.seconds, e.notification_time.seconds + 3600))
        out[i].label = ReceptivityLabel::NonReceptive;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    std::int64_t best = -1;
    for (const auto& e : evs) {
      if (!e.responded()) continue;
      const std::int64_t hi = e.response_time->seconds;
      if (!half_covered(segs[i], hi - w * 60LL, hi)) continue;
      const std::int64_t d = std::llabs(2 * hi - segs[i].start.seconds - segs[i].end().seconds);
      if (best < 0 || d < best) {
        best = d;
        out[i] = {ReceptivityLabel::Receptive, e.pa_score};
      }
    }
  }
  return out;
}

std::vector<EmaEvent> random_events(std::mt19937_64& gen, int count) {
  std::vector<EmaEvent> evs;
  std::int64_t t = kDay + 3600;
  for (int i = 0; i < count; ++i) {
    t += 600 + static_cast<std::int64_t>(gen() % 10800);
    if (gen() % 3 == 0) {
      evs.push_back(missed(Timestamp{t}));
    } else {
      const std::int64_t delay = static_cast<std::int64_t>(gen() % 3601);
      evs.push_back(answered(Timestamp{t}, Timestamp{t + delay}, 5.0 + static_cast<double>(gen() % 21)));
    }
  }
  return evs;
}

}  // namespace

TEST(Labeling, ResponseMarksWindowBeforeResponse) {
  const auto segs = grid(10);
  const auto ls = label_receptivity(segs, std::vector{answered(at(10, 0), at(10, 20), 17)}, 30);
  // 09:50-10:20 is covered by the 09:50, 10:00 and 10:10 cells
  for (auto t : {at(9, 50), at(10, 0), at(10, 10)}) {
    EXPECT_EQ(at_start(ls, t).receptivity, ReceptivityLabel::Receptive);
    EXPECT_EQ(at_start(ls, t).pa_score, 17.0);
    EXPECT_EQ(at_start(ls, t).source_event, 0u);
  }
  EXPECT_EQ(at_start(ls, at(9, 40)).receptivity, ReceptivityLabel::Unlabeled);
  EXPECT_EQ(at_start(ls, at(10, 20)).receptivity, ReceptivityLabel::Unlabeled);
}

TEST(Labeling, ResponseOnThirtyMinuteGridUsesHalfOverlap) {
  const auto segs = grid(30);
  const auto ls = label_receptivity(segs, std::vector{answered(at(10, 0), at(10, 20), 17)}, 30);
  // [09:30,10:00) holds 10 of 30 minutes of the span, [10:00,10:30) holds 20
  EXPECT_EQ(at_start(ls, at(9, 30)).receptivity, ReceptivityLabel::Unlabeled);
  EXPECT_EQ(at_start(ls, at(10, 0)).receptivity, ReceptivityLabel::Receptive);
  EXPECT_EQ(at_start(ls, at(10, 30)).receptivity, ReceptivityLabel::Unlabeled);
}

TEST(Labeling, NonResponseMarksFollowingHour) {
  const auto segs = grid(30);
  const auto ls = label_receptivity(segs, std::vector{missed(at(10, 0))}, 30);
  EXPECT_EQ(at_start(ls, at(9, 30)).receptivity, ReceptivityLabel::Unlabeled);
  EXPECT_EQ(at_start(ls, at(10, 0)).receptivity, ReceptivityLabel::NonReceptive);
  EXPECT_EQ(at_start(ls, at(10, 30)).receptivity, ReceptivityLabel::NonReceptive);
  EXPECT_EQ(at_start(ls, at(11, 0)).receptivity, ReceptivityLabel::Unlabeled);
  EXPECT_FALSE(at_start(ls, at(10, 0)).pa_score.has_value());
}

TEST(Labeling, NoEventsLeavesEverythingUnlabeled) {
  const auto segs = grid(15);
  const auto ls = label_receptivity(segs, std::vector<EmaEvent>{}, 15);
  ASSERT_EQ(ls.size(), segs.size());
  for (const auto& l : ls) EXPECT_EQ(l.receptivity, ReceptivityLabel::Unlabeled);
}

TEST(Labeling, ReceptiveWinsOverEarlierNonResponse) {
  const auto segs = grid(30);
  const std::vector<EmaEvent> evs = {missed(at(10, 0)), answered(at(10, 30), at(10, 55), 12)};
  const auto ls = label_receptivity(segs, evs, 30);
  EXPECT_EQ(at_start(ls, at(10, 0)).receptivity, ReceptivityLabel::NonReceptive);
  EXPECT_EQ(at_start(ls, at(10, 30)).receptivity, ReceptivityLabel::Receptive);
  EXPECT_EQ(at_start(ls, at(10, 30)).source_event, 1u);
  const auto a = oracle_receptive_first(segs, evs, 30);
  const auto b = oracle_nonreceptive_first(segs, evs, 30);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_EQ(ls[i].receptivity, a[i].label);
    EXPECT_EQ(ls[i].receptivity, b[i].label);
  }
}

TEST(Labeling, NearestResponseSuppliesScore) {
  const auto segs = grid(30);
  const std::vector<EmaEvent> evs = {answered(at(9, 0), at(10, 20), 8), answered(at(10, 5), at(10, 28), 20)};
  const auto ls = label_receptivity(segs, evs, 30);
  EXPECT_EQ(at_start(ls, at(10, 0)).pa_score, 8.0);  // 10:20 is 5 min from the midpoint, 10:28 is 13
  const std::vector<EmaEvent> swapped = {answered(at(9, 0), at(10, 26), 8), answered(at(10, 5), at(10, 16), 20)};
  EXPECT_EQ(at_start(label_receptivity(segs, swapped, 30), at(10, 0)).pa_score, 20.0);
}

TEST(Labeling, RandomStreamsMatchBothOrderOracles) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int width = kAllowedWidths[gen() % 5];
    const auto segs = grid(width, 36);
    const auto evs = random_events(gen, 1 + static_cast<int>(gen() % 8));
    const auto ls = label_receptivity(segs, evs, width);
    const auto a = oracle_receptive_first(segs, evs, width);
    const auto b = oracle_nonreceptive_first(segs, evs, width);
    ASSERT_EQ(ls.size(), segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      EXPECT_EQ(ls[i].receptivity, a[i].label) << "trial " << trial << " seg " << i;
      EXPECT_EQ(ls[i].receptivity, b[i].label) << "trial " << trial << " seg " << i;
      EXPECT_EQ(ls[i].pa_score, a[i].pa) << "trial " << trial << " seg " << i;
    }
  }
}

TEST(Labeling, RandomStreamsSatisfyInvariants) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int width = kAllowedWidths[gen() % 5];
    const auto segs = grid(width, 36);
    const auto evs = random_events(gen, 1 + static_cast<int>(gen() % 8));
    const auto ls = label_receptivity(segs, evs, width);
    std::size_t labeled = 0;
    for (const auto& l : ls) {
      if (l.receptivity != ReceptivityLabel::Unlabeled) ++labeled;
      ASSERT_EQ(l.pa_score.has_value(), l.receptivity == ReceptivityLabel::Receptive);
      if (l.receptivity == ReceptivityLabel::Receptive) {
        const auto& ev = evs.at(*l.source_event);
        ASSERT_TRUE(ev.responded());
        const std::int64_t hi = ev.response_time->seconds;
        EXPECT_TRUE(half_covered(l.segment, hi - width * 60LL, hi));
        EXPECT_GE(*l.pa_score, ev.scale_min);
        EXPECT_LE(*l.pa_score, ev.scale_max);
      }
      if (l.receptivity == ReceptivityLabel::NonReceptive) {
        const auto& ev = evs.at(*l.source_event);
        EXPECT_FALSE(ev.responded());
      }
    }
    EXPECT_LE(labeled, ls.size());
  }
}

TEST(Labeling, NonResponseSpanIndependentOfWidth) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    // notifications on the 60-minute grid so every width tiles the span exactly
    std::vector<EmaEvent> evs;
    for (int h = 1; h < 22; h += 2 + static_cast<int>(gen() % 3)) {
      if (gen() % 2) {
        evs.push_back(missed(at(h, 0)));
      } else {
        evs.push_back(answered(at(h, 0), Timestamp{at(h, 0).seconds + static_cast<std::int64_t>(gen() % 3601)}, 10));
      }
    }
    std::vector<std::int64_t> covered_by_width;
    for (int width : kAllowedWidths) {
      const auto ls = label_receptivity(grid(width), evs, width);
      std::int64_t nonrec_or_rec_in_span = 0;
      for (const auto& l : ls)
        for (const auto& e : evs)
          if (!e.responded() && l.receptivity != ReceptivityLabel::Unlabeled)
            nonrec_or_rec_in_span += overlap(l.segment, e.notification_time.seconds, e.notification_time.seconds + 3600);
      covered_by_width.push_back(nonrec_or_rec_in_span);
      // every minute of every unanswered span is labeled, whatever the width
      for (const auto& e : evs)
        if (!e.responded())
          for (const auto& l : ls)
            if (overlap(l.segment, e.notification_time.seconds, e.notification_time.seconds + 3600) > 0)
              EXPECT_NE(l.receptivity, ReceptivityLabel::Unlabeled);
    }
    for (auto c : covered_by_width) EXPECT_EQ(c, covered_by_width.front());
  }
}

TEST(Labeling, WidthChangesOnlyReceptiveCounts) {
  const std::vector<EmaEvent> evs = {answered(at(9, 0), at(9, 40), 11), missed(at(13, 0))};
  for (int width : kAllowedWidths) {
    const auto ls = label_receptivity(grid(width), evs, width);
    std::int64_t nonrec_minutes = 0;
    for (const auto& l : ls)
      if (l.receptivity == ReceptivityLabel::NonReceptive) nonrec_minutes += width;
    EXPECT_EQ(nonrec_minutes, 60) << width;
  }
}

TEST(Distribution, AllUnlabeledGivesZeroCounts) {
  const auto ls = label_receptivity(grid(30), std::vector<EmaEvent>{}, 30);
  const auto d = label_distribution(ls);
  EXPECT_EQ(d.receptive, 0u);
  EXPECT_EQ(d.non_receptive, 0u);
  EXPECT_EQ(d.unlabeled, ls.size());
  EXPECT_TRUE(d.pa_histogram.empty());
}

TEST(Distribution, HandEnumeratedFixture) {
  // 10-minute grid, 30-minute window: each response spans 3 cells, each miss 6 cells
  const std::vector<EmaEvent> evs = {answered(at(8, 0), at(8, 30), 10), answered(at(10, 0), at(10, 30), 12),
                                     answered(at(12, 0), at(12, 30), 14), missed(at(14, 0)), missed(at(16, 0))};
  const auto ls = label_receptivity(grid(10), evs, 30);
  const auto d = label_distribution(ls);
  EXPECT_EQ(d.receptive, 3u * 3u);
  EXPECT_EQ(d.non_receptive, 2u * 6u);
  EXPECT_EQ(d.unlabeled, ls.size() - 21u);
}

TEST(Distribution, EqualScoresGiveSingleBin) {
  const std::vector<EmaEvent> evs = {answered(at(8, 0), at(8, 30), 15), answered(at(12, 0), at(12, 30), 15)};
  const auto d = label_distribution(label_receptivity(grid(30), evs, 30));
  ASSERT_EQ(d.pa_histogram.size(), 1u);
  EXPECT_EQ(d.pa_histogram[0].count, d.receptive);
}

TEST(LabelsCsv, RoundTrip) {
  const std::vector<EmaEvent> evs = {answered(at(8, 0), at(8, 30), 15.25), missed(at(12, 0))};
  const auto ls = label_receptivity(grid(30), evs, 30);
  const auto path = std::filesystem::temp_directory_path() / "emasched_labels_roundtrip.csv";
  write_file_atomic(path, labels_to_csv(ls));
  const auto back = labels_from_csv(path);
  ASSERT_EQ(back.size(), ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    EXPECT_EQ(back[i].segment.start, ls[i].segment.start);
    EXPECT_EQ(back[i].receptivity, ls[i].receptivity);
    EXPECT_EQ(back[i].pa_score, ls[i].pa_score);
    EXPECT_EQ(back[i].source_event, ls[i].source_event);
  }
}
