#include "emasched/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "emasched/io.hpp"

namespace emasched {

std::string to_string(ReceptivityLabel l) {
  switch (l) {
    case ReceptivityLabel::Receptive: return "receptive";
    case ReceptivityLabel::NonReceptive: return "non_receptive";
    case ReceptivityLabel::Unlabeled: return "unlabeled";
  }
  return "?";
}

ReceptivityLabel parse_receptivity_label(std::string_view s) {
  if (s == "receptive") return ReceptivityLabel::Receptive;
  if (s == "non_receptive") return ReceptivityLabel::NonReceptive;
  if (s == "unlabeled") return ReceptivityLabel::Unlabeled;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

namespace {

std::int64_t overlap_seconds(const Segment& s, Timestamp lo, Timestamp hi) {
  const std::int64_t a = std::max(s.start.seconds, lo.seconds);
  const std::int64_t b = std::min(s.end().seconds, hi.seconds);
  return std::max<std::int64_t>(0, b - a);
}

}  // namespace

std::vector<LabeledSegment> label_receptivity(std::span<const Segment> segments, std::span<const EmaEvent> events,
                                              int window_minutes, const LabelingOptions& opts) {
  if (window_minutes <= 0) throw std::invalid_argument("labeling window must be positive");
  std::vector<LabeledSegment> out(segments.size());
  std::vector<std::int64_t> best_distance(segments.size(), std::numeric_limits<std::int64_t>::max());
  for (std::size_t i = 0; i < segments.size(); ++i) out[i].segment = segments[i];

  auto qualifies = [&](const Segment& s, Timestamp lo, Timestamp hi) {
    const double need = opts.min_overlap_fraction * static_cast<double>(s.width_minutes) * 60.0;
    return static_cast<double>(overlap_seconds(s, lo, hi)) >= need && overlap_seconds(s, lo, hi) > 0;
  };

  // Segments are sorted by start; find the first that can overlap [lo, hi].
  auto first_candidate = [&](Timestamp lo) {
    return std::lower_bound(segments.begin(), segments.end(), lo,
                            [](const Segment& s, Timestamp t) { return s.end() <= t; }) -
           segments.begin();
  };

  for (std::size_t e = 0; e < events.size(); ++e) {
    const EmaEvent& ev = events[e];
    if (ev.responded()) continue;
    const Timestamp lo = ev.notification_time;
    const Timestamp hi = ev.notification_time.plus_minutes(opts.non_response_minutes);
    for (auto i = static_cast<std::size_t>(first_candidate(lo)); i < segments.size() && segments[i].start < hi; ++i) {
      if (!qualifies(segments[i], lo, hi)) continue;
      auto& l = out[i];
      if (l.receptivity == ReceptivityLabel::Unlabeled) {
        l.receptivity = ReceptivityLabel::NonReceptive;
        l.source_event = e;
      }
    }
  }
  for (std::size_t e = 0; e < events.size(); ++e) {
    const EmaEvent& ev = events[e];
    if (!ev.responded()) continue;
    const Timestamp hi = *ev.response_time;
    const Timestamp lo = hi.plus_minutes(-window_minutes);
    for (auto i = static_cast<std::size_t>(first_candidate(lo)); i < segments.size() && segments[i].start < hi; ++i) {
      const Segment& s = segments[i];
      if (!qualifies(s, lo, hi)) continue;
      const std::int64_t mid2 = s.start.seconds + s.end().seconds;  // twice the midpoint
      const std::int64_t dist = std::llabs(2 * hi.seconds - mid2);
      auto& l = out[i];
      if (l.receptivity != ReceptivityLabel::Receptive || dist < best_distance[i]) {
        l.receptivity = ReceptivityLabel::Receptive;
        l.pa_score = ev.pa_score;
        l.source_event = e;
        best_distance[i] = dist;
      }
    }
  }
  return out;
}

LabelDistribution label_distribution(std::span<const LabeledSegment> labeled) {
  LabelDistribution d;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& l : labeled) {
    switch (l.receptivity) {
      case ReceptivityLabel::Receptive: ++d.receptive; break;
      case ReceptivityLabel::NonReceptive: ++d.non_receptive; break;
      case ReceptivityLabel::Unlabeled: ++d.unlabeled; break;
    }
    if (l.pa_score) {
      lo = std::min(lo, *l.pa_score);
      hi = std::max(hi, *l.pa_score);
    }
  }
  if (lo > hi) return d;
  const double first = std::floor(lo);
  const auto nbins = static_cast<std::size_t>(std::floor(hi) - first) + 1;
  d.pa_histogram.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    d.pa_histogram[b].lo = first + static_cast<double>(b);
    d.pa_histogram[b].hi = first + static_cast<double>(b) + 1.0;
  }
  for (const auto& l : labeled)
    if (l.pa_score) ++d.pa_histogram[static_cast<std::size_t>(std::floor(*l.pa_score) - first)].count;
  return d;
}

std::string labels_to_csv(std::span<const LabeledSegment> labeled) {
  std::string out = "participant_id,segment_start,width,label,pa_score,source_event\n";
  for (const auto& l : labeled) {
    out += l.segment.participant_id + "," + std::to_string(l.segment.start.seconds) + "," +
           std::to_string(l.segment.width_minutes) + "," + to_string(l.receptivity) + "," +
           (l.pa_score ? format_double(*l.pa_score) : "") + "," +
           (l.source_event ? std::to_string(*l.source_event) : "") + "\n";
  }
  return out;
}

std::vector<LabeledSegment> labels_from_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  require_header(t, {"participant_id", "segment_start", "width", "label", "pa_score", "source_event"});
  std::vector<LabeledSegment> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    LabeledSegment l;
    l.segment.participant_id = row[0];
    l.segment.start = Timestamp{parse_int(row[1], t.where(r))};
    l.segment.width_minutes = static_cast<int>(parse_int(row[2], t.where(r)));
    try {
      l.receptivity = parse_receptivity_label(row[3]);
    } catch (const std::exception& e) {
      throw std::runtime_error(t.where(r) + ": " + e.what());
    }
    l.pa_score = parse_optional_double(row[4], t.where(r));
    if (!row[5].empty()) l.source_event = static_cast<std::size_t>(parse_int(row[5], t.where(r)));
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace emasched
