#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "emasched/rng.hpp"
#include "emasched/trigger.hpp"

using namespace emasched;

namespace {

TriggerConfig weights(double wu, double wr) {
  TriggerConfig c;
  c.w_u = wu;
  c.w_r = wr;
  return c;
}

std::vector<Candidate> random_candidates(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Candidate> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = {Timestamp{static_cast<std::int64_t>(1000 + 1800 * i)}, {u(gen), 15.0, u(gen) * 4}};
  return c;
}

// Exhaustive scan written from the definition: normalize, score, first maximum.
std::size_t brute_force_argmax(const std::vector<Candidate>& c, const TriggerConfig& cfg) {
  double lo = c[0].output.emo_var, hi = lo;
  for (const auto& x : c) {
    lo = std::min(lo, x.output.emo_var);
    hi = std::max(hi, x.output.emo_var);
  }
  std::size_t best = 0;
  double best_j = -1;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double u = cfg.norm == UncertaintyNorm::Raw ? c[i].output.emo_var
                     : hi > lo                         ? (c[i].output.emo_var - lo) / (hi - lo)
                                                       : 0.5;
    const double j = cfg.w_u * u * u + cfg.w_r * c[i].output.r_prob * c[i].output.r_prob;
    if (j > best_j) {
      best_j = j;
      best = i;
    }
  }
  return best;
}

// Two-day cohort of predictions on a 30-minute grid from 08:00 to 23:00 local.
std::vector<SegmentPrediction> grid_predictions(const std::string& pid, int days, std::mt19937_64& gen,
                                                bool constant) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<SegmentPrediction> out;
  const std::int64_t day0 = 19786;
  for (int d = 0; d < days; ++d) {
    for (int m = 8 * 60; m < 23 * 60; m += 30) {
      SegmentPrediction p;
      p.participant = pid;
      p.start = local_midnight(day0 + d, 0).plus_minutes(m);
      p.study_day = d + 1;
      const double truth = 0.1 + 0.8 * u(gen);
      p.truth_p_resp = truth;
      p.truth_pa = 15.0;
      p.output = constant ? ModelOutput{0.6, 15.0, 1.0} : ModelOutput{truth, 10.0 + 10.0 * u(gen), u(gen)};
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST(Objective, WorkedValues) {
  EXPECT_NEAR(objective_j(0.6, 0.8, weights(1, 1)), 1.0, 1e-15);
  for (double u : {0.0, 0.3, 0.9}) EXPECT_DOUBLE_EQ(objective_j(u, 0.7, weights(0, 2)), 2 * 0.49);
  EXPECT_THROW(objective_j(0.5, 0.5, weights(-1, 1)), ConfigError);
}

TEST(Objective, MonotoneInBothArguments) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto cfg = weights(u(gen) * 3, u(gen) * 3);
    const double a = u(gen), b = u(gen), r = u(gen);
    EXPECT_LE(objective_j(std::min(a, b), r, cfg), objective_j(std::max(a, b), r, cfg));
    EXPECT_LE(objective_j(r, std::min(a, b), cfg), objective_j(r, std::max(a, b), cfg));
  }
}

TEST(TriggerConfig, Validation) {
  EXPECT_NO_THROW(TriggerConfig{}.validate());
  EXPECT_THROW(weights(-0.1, 1).validate(), ConfigError);
  EXPECT_THROW(weights(0, 0).validate(), ConfigError);
  TriggerConfig c;
  c.windows = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Normalize, WindowMinMax) {
  const std::vector<double> v = {2.0, 4.0, 3.0};
  EXPECT_EQ(normalize_uncertainty(v, UncertaintyNorm::WindowMinMax), (std::vector<double>{0.0, 1.0, 0.5}));
  EXPECT_EQ(normalize_uncertainty(v, UncertaintyNorm::Raw), v);
  EXPECT_EQ(normalize_uncertainty(std::vector<double>{7, 7}, UncertaintyNorm::WindowMinMax), (std::vector<double>{0.5, 0.5}));
}

TEST(SelectSmart, SingleCandidate) {
  std::mt19937_64 gen(2);
  const auto c = random_candidates(gen, 1);
  const auto d = select_smart(c, TriggerConfig{});
  EXPECT_EQ(d.candidate, 0u);
  EXPECT_EQ(d.time, c[0].time);
  EXPECT_THROW(select_smart(std::vector<Candidate>{}, TriggerConfig{}), std::invalid_argument);
}

TEST(SelectSmart, ConstantJPicksEarliest) {
  std::vector<Candidate> c;
  for (int i = 0; i < 6; ++i) c.push_back({Timestamp{5000 - 300 * i}, {0.5, 12.0, 1.0}});
  const auto d = select_smart(c, TriggerConfig{});
  EXPECT_EQ(d.time, Timestamp{5000 - 300 * 5});
}

TEST(SelectSmart, MatchesBruteForceAndDominatesWindow) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_candidates(gen, 1 + gen() % 12);
    auto cfg = weights(u(gen), u(gen) + 0.01);
    cfg.norm = trial % 2 ? UncertaintyNorm::Raw : UncertaintyNorm::WindowMinMax;
    const auto d = select_smart(c, cfg);
    EXPECT_EQ(d.candidate, brute_force_argmax(c, cfg));
    std::vector<double> var;
    for (const auto& x : c) var.push_back(x.output.emo_var);
    const auto un = normalize_uncertainty(var, cfg.norm);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_GE(d.j_value, objective_j(un[i], c[i].output.r_prob, cfg));
  }
}

TEST(SelectSmart, WeightScalingKeepsChoice) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.01, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_candidates(gen, 2 + gen() % 10);
    const auto cfg = weights(u(gen), u(gen));
    const double k = u(gen) * 10;
    EXPECT_EQ(select_smart(c, cfg).candidate, select_smart(c, weights(cfg.w_u * k, cfg.w_r * k)).candidate);
  }
}

TEST(SelectRandom, UniformOverSixCandidates) {
  std::array<int, 6> counts{};
  for (std::uint64_t i = 0; i < 10000; ++i) ++counts[select_random(6, derive_seed(77, {i}))];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 10000.0 / 6) * (c - 10000.0 / 6) / (10000.0 / 6);
  EXPECT_LT(chi2, 15.086);  // chi-square(5) upper 1% point
  EXPECT_EQ(select_random(6, 42), select_random(6, 42));
  EXPECT_EQ(select_random(1, 42), 0u);
  EXPECT_THROW(select_random(0, 1), std::invalid_argument);
}

TEST(Windows, FiveThreeHourWindowsFrom0800) {
  const TriggerConfig cfg;
  const auto ws = scheduling_windows(19786, 120, cfg);
  ASSERT_EQ(ws.size(), 5u);
  EXPECT_EQ(local_seconds_of_day(ws[0].start, 120), 8 * 3600);
  EXPECT_EQ(local_seconds_of_day(ws[4].end, 120), 23 * 3600);
  for (const auto& w : ws) EXPECT_EQ(candidate_times(w, cfg).size(), 6u);
}

TEST(Simulate, OneParticipantTwoDays) {
  std::mt19937_64 gen(5);
  const auto preds = grid_predictions("p1", 2, gen, false);
  const auto r = simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::ModelBernoulli, 1);
  std::size_t smart = 0, rnd = 0;
  for (const auto& d : r.decisions) (d.decision.policy == Policy::Smart ? smart : rnd)++;
  EXPECT_EQ(smart, 10u);
  EXPECT_EQ(rnd, 10u);
  EXPECT_TRUE(r.skipped.empty());
  ASSERT_EQ(r.participants.size(), 1u);
  EXPECT_GE(r.participants[0].smart.response_rate, 0.0);
  EXPECT_LE(r.participants[0].smart.response_rate, 1.0);
}

TEST(Simulate, SkippedWindowsAreLoggedAndCounted) {
  std::mt19937_64 gen(6);
  auto preds = grid_predictions("p1", 3, gen, false);
  // drop every candidate of day 2, window 1 (11:00-14:00)
  const Timestamp lo = local_midnight(19787, 0).plus_minutes(11 * 60), hi = lo.plus_minutes(180);
  std::erase_if(preds, [&](const SegmentPrediction& p) { return lo <= p.start && p.start < hi; });
  const auto r = simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::ModelThreshold, 1);
  EXPECT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.decisions.size(), 5u * 3u * 2u - 2u * r.skipped.size());
}

TEST(Simulate, SmartDecisionsMaximizeJ) {
  std::mt19937_64 gen(7);
  const auto preds = grid_predictions("p1", 2, gen, false);
  const auto r = simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::ModelBernoulli, 1);
  for (const auto& s : r.decisions) {
    if (s.decision.policy != Policy::Smart) continue;
    for (const auto& o : r.decisions)
      if (o.decision.day == s.decision.day && o.decision.window == s.decision.window)
        EXPECT_GE(s.decision.j_value, o.decision.j_value);
  }
}

TEST(Simulate, ConstantModelsGiveEqualRates) {
  std::mt19937_64 gen(8);
  std::vector<SegmentPrediction> preds;
  std::map<std::string, int> offsets;
  for (int p = 0; p < 40; ++p) {
    const auto one = grid_predictions("p" + std::to_string(p), 14, gen, true);
    preds.insert(preds.end(), one.begin(), one.end());
    offsets["p" + std::to_string(p)] = 0;
  }
  const auto r = simulate_triggers(preds, offsets, TriggerConfig{}, OutcomeSource::ModelBernoulli, 3);
  double smart = 0, rnd = 0;
  for (const auto& ps : r.participants) {
    smart += static_cast<double>(ps.smart.responses);
    rnd += static_cast<double>(ps.random.responses);
  }
  const double n = 40 * 14 * 5;
  // difference of two binomial(n, 0.6) proportions: sd = sqrt(2 * 0.24 / n)
  EXPECT_LT(std::abs(smart / n - rnd / n), 4 * std::sqrt(2 * 0.24 / n));
}

TEST(Simulate, PlantedReceptivityFavoursSmart) {
  double gap = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 gen(seed);
    std::vector<SegmentPrediction> preds;
    std::map<std::string, int> offsets;
    for (int p = 0; p < 10; ++p) {
      auto one = grid_predictions("p" + std::to_string(p), 5, gen, false);
      std::normal_distribution<double> noise(0, 0.1);
      for (auto& s : one) s.output.r_prob = std::clamp(*s.truth_p_resp + noise(gen), 0.0, 1.0);
      preds.insert(preds.end(), one.begin(), one.end());
      offsets["p" + std::to_string(p)] = 0;
    }
    const auto r = simulate_triggers(preds, offsets, weights(0, 1), OutcomeSource::GenerativeTruth, seed);
    for (const auto& ps : r.participants) gap += ps.smart.response_rate - ps.random.response_rate;
  }
  EXPECT_GE(gap / (20 * 10), 0.0);
}

TEST(Simulate, GenerativeTruthRequiresTruth) {
  std::mt19937_64 gen(9);
  auto preds = grid_predictions("p1", 1, gen, false);
  for (auto& p : preds) p.truth_p_resp.reset();
  EXPECT_THROW(simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::GenerativeTruth, 1),
               std::invalid_argument);
}

TEST(Simulate, DeterministicAndJsonRoundTrip) {
  std::mt19937_64 gen(10);
  const auto preds = grid_predictions("p1", 3, gen, false);
  const auto a = simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::ModelBernoulli, 5);
  const auto b = simulate_triggers(preds, {{"p1", 0}}, TriggerConfig{}, OutcomeSource::ModelBernoulli, 5);
  EXPECT_EQ(simulation_to_json(a).dump(), simulation_to_json(b).dump());
  const auto back = simulation_from_json(Json::parse(simulation_to_json(a).dump()));
  EXPECT_EQ(simulation_to_json(back).dump(), simulation_to_json(a).dump());
  EXPECT_EQ(simulation_summary_csv(back), simulation_summary_csv(a));
  EXPECT_THROW(simulation_from_json(Json::object()), std::runtime_error);
}
