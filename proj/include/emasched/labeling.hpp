#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emasched/core_data.hpp"

namespace emasched {

enum class ReceptivityLabel { Unlabeled, Receptive, NonReceptive };
std::string to_string(ReceptivityLabel l);
ReceptivityLabel parse_receptivity_label(std::string_view s);

struct LabeledSegment {
  Segment segment;
  ReceptivityLabel receptivity = ReceptivityLabel::Unlabeled;
  std::optional<double> pa_score;         // Receptive only
  std::optional<std::size_t> source_event;  // index into the participant's events
};

struct LabelingOptions {
  int non_response_minutes = kResponseWindowMinutes;
  double min_overlap_fraction = 0.5;  // of the segment's duration
};

/// Answered events mark segments overlapping [response - window, response] as
/// Receptive with the event's PA score; unanswered events mark segments
/// overlapping [notification, notification + 60 min] as NonReceptive.
/// Receptive wins over NonReceptive; among several responses the one nearest the
/// segment midpoint supplies the score.
std::vector<LabeledSegment> label_receptivity(std::span<const Segment> segments, std::span<const EmaEvent> events,
                                              int window_minutes, const LabelingOptions& opts = {});

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct LabelDistribution {
  std::size_t receptive = 0;
  std::size_t non_receptive = 0;
  std::size_t unlabeled = 0;
  std::vector<HistogramBin> pa_histogram;  // unit-width bins over the observed PA range
};

LabelDistribution label_distribution(std::span<const LabeledSegment> labeled);

std::string labels_to_csv(std::span<const LabeledSegment> labeled);
std::vector<LabeledSegment> labels_from_csv(const std::filesystem::path& path);

}  // namespace emasched
