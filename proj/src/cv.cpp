#include "emasched/cv.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace emasched {

std::string to_string(CvMode m) {
  switch (m) {
    case CvMode::SemiPersonalized: return "semi_personalized";
    case CvMode::Loso: return "loso";
    case CvMode::GroupedLoso: return "grouped_loso";
  }
  return "semi_personalized";
}

CvMode parse_cv_mode(std::string_view s) {
  if (s == "semi_personalized") return CvMode::SemiPersonalized;
  if (s == "loso") return CvMode::Loso;
  if (s == "grouped_loso") return CvMode::GroupedLoso;
  throw std::invalid_argument("unknown CV mode '" + std::string(s) + "'");
}

CvPlan make_cv_plan(const FeatureTable& table, CvMode mode, int groups) {
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < table.rows(); ++r) rows_of[table.segments[r].participant_id].push_back(r);
  if (rows_of.size() < 2) throw std::invalid_argument("cross-validation needs at least two participants");

  CvPlan plan;
  plan.mode = mode;
  if (mode == CvMode::SemiPersonalized) {
    for (const auto& [pid, rows] : rows_of) {
      std::set<int> days;
      for (auto r : rows) days.insert(table.segments[r].study_day);
      for (int day : days) {
        CvFold f;
        f.test_participants = {pid};
        f.test_day = day;
        for (std::size_t r = 0; r < table.rows(); ++r) {
          const auto& s = table.segments[r];
          if (s.participant_id != pid) f.train.push_back(r);
          else if (s.study_day < day) f.train.push_back(r);
          else if (s.study_day == day) f.test.push_back(r);
        }
        plan.folds.push_back(std::move(f));
      }
    }
    return plan;
  }

  std::vector<std::vector<std::string>> members;
  if (mode == CvMode::Loso) {
    for (const auto& [pid, rows] : rows_of) members.push_back({pid});
  } else {
    if (groups < 2) throw std::invalid_argument("grouped CV needs at least two groups");
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(groups), rows_of.size());
    members.resize(k);
    std::size_t i = 0;
    for (const auto& [pid, rows] : rows_of) members[i++ % k].push_back(pid);
  }
  for (auto& m : members) {
    CvFold f;
    f.test_participants = m;
    const std::set<std::string> held(m.begin(), m.end());
    for (std::size_t r = 0; r < table.rows(); ++r)
      (held.count(table.segments[r].participant_id) ? f.test : f.train).push_back(r);
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

}  // namespace emasched
