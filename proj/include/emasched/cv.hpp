#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "emasched/core_data.hpp"

namespace emasched {

enum class CvMode {
  SemiPersonalized,  // one fold per (participant, day); earlier days of the participant join training
  Loso,              // one fold per participant
  GroupedLoso,       // participants dealt into k groups; one fold per group
};

std::string to_string(CvMode m);
CvMode parse_cv_mode(std::string_view s);

struct CvFold {
  std::vector<std::size_t> train;  // row indices into the feature table
  std::vector<std::size_t> test;
  std::vector<std::string> test_participants;
  int test_day = 0;  // 0 = all days
};

struct CvPlan {
  CvMode mode = CvMode::SemiPersonalized;
  std::vector<CvFold> folds;
};

/// Throws with fewer than two participants. `groups` applies to GroupedLoso only.
CvPlan make_cv_plan(const FeatureTable& table, CvMode mode, int groups = 5);

}  // namespace emasched
