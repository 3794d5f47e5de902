#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "emasched/synthcohort.hpp"

using namespace emasched;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emasched_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CohortSpec big_spec(double coupling, double base_rate, std::uint64_t seed) {
  CohortSpec s;
  s.participants = 60;
  s.days = 14;
  s.coupling = coupling;
  s.base_rate = base_rate;
  s.seed = seed;
  return s;
}

// Pearson correlation between the response indicator and latent PA at each prompt.
double response_pa_correlation(const SyntheticCohort& sc) {
  std::vector<double> r, pa;
  for (const auto& [id, truth] : sc.truth.participants)
    for (const auto& resp : truth.responses) {
      const TruthPoint* at = truth.at(resp.notification_time);
      if (!at) continue;
      r.push_back(resp.responded ? 1.0 : 0.0);
      pa.push_back(at->latent_pa);
    }
  const double n = static_cast<double>(r.size());
  double mr = 0, mp = 0;
  for (std::size_t i = 0; i < r.size(); ++i) mr += r[i], mp += pa[i];
  mr /= n;
  mp /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sxy += (r[i] - mr) * (pa[i] - mp);
    sxx += (r[i] - mr) * (r[i] - mr);
    syy += (pa[i] - mp) * (pa[i] - mp);
  }
  return sxy / std::sqrt(sxx * syy);
}

double response_rate(const SyntheticCohort& sc) {
  double yes = 0, total = 0;
  for (const auto& p : sc.cohort.participants)
    for (const auto& e : p.events) yes += e.responded(), ++total;
  return yes / total;
}

}  // namespace

TEST(SynthCohort, ZeroCouplingGivesNoResponsePaCorrelation) {
  const auto sc = synthesize_cohort(big_spec(0.0, 0.7, 11));
  EXPECT_NEAR(response_pa_correlation(sc), 0.0, 0.05);
}

TEST(SynthCohort, PositiveCouplingRaisesResponseAtHighPa) {
  const auto sc = synthesize_cohort(big_spec(1.5, 0.7, 12));
  EXPECT_GT(response_pa_correlation(sc), 0.1);
}

TEST(SynthCohort, MarginalResponseRateMatchesBaseRate) {
  const auto sc = synthesize_cohort(big_spec(1.0, 0.8, 13));
  EXPECT_NEAR(response_rate(sc), 0.80, 0.03);
}

TEST(SynthCohort, CalibratedInterceptMatchesMonteCarlo) {
  for (double rate : {0.3, 0.7, 0.8}) {
    CohortSpec s;
    s.base_rate = rate;
    const double alpha = calibrate_alpha(s);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd(0, 1);
    std::uniform_real_distribution<double> u(0, 1);
    double sum = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double logit = alpha + s.propensity_sd * nd(gen) + s.coupling * nd(gen) + (u(gen) < s.busy_fraction ? s.busy_effect : 0.0);
      sum += 1.0 / (1.0 + std::exp(-logit));
    }
    EXPECT_NEAR(sum / n, rate, 0.003);
  }
}

TEST(SynthCohort, ResponseProbabilityFollowsLogisticFormula) {
  CohortSpec s;
  s.participants = 3;
  s.days = 2;
  s.coupling = 0.8;
  const auto sc = synthesize_cohort(s);
  for (const auto& [id, truth] : sc.truth.participants) {
    ASSERT_FALSE(truth.points.empty());
    for (const auto& t : truth.points) {
      EXPECT_DOUBLE_EQ(t.p_resp, 1.0 / (1.0 + std::exp(-(t.logit_offset + s.coupling * t.z + s.busy_effect * t.busy))));
    }
    for (const auto& r : truth.responses) EXPECT_EQ(r.p_resp, truth.at(r.notification_time)->p_resp);
  }
}

TEST(SynthCohort, EventsRespectScaleAndResponseWindow) {
  CohortSpec s;
  s.participants = 8;
  s.days = 5;
  const auto sc = synthesize_cohort(s);
  for (const auto& p : sc.cohort.participants) {
    EXPECT_EQ(p.events.size(), static_cast<std::size_t>(s.days * s.daily_prompts));
    for (const auto& e : p.events) {
      EXPECT_NO_THROW(validate_event(e));
      if (!e.responded()) continue;
      EXPECT_GE(*e.pa_score, s.pa_min);
      EXPECT_LE(*e.pa_score, s.pa_max);
      EXPECT_EQ(*e.pa_score, std::round(*e.pa_score));
      const auto delay = e.response_time->seconds - e.notification_time.seconds;
      EXPECT_GT(delay, 0);
      EXPECT_LE(delay, 60 * kResponseWindowMinutes);
    }
  }
  for (const auto& [id, truth] : sc.truth.participants)
    for (const auto& t : truth.points) {
      EXPECT_GE(t.latent_pa, s.pa_min);
      EXPECT_LE(t.latent_pa, s.pa_max);
    }
}

TEST(SynthCohort, PaScoresAreUnimodal) {
  const auto sc = synthesize_cohort(big_spec(0.0, 0.7, 14));
  std::vector<int> bins(5, 0);  // [5,9) [9,13) [13,17) [17,21) [21,25]
  for (const auto& p : sc.cohort.participants)
    for (const auto& e : p.events)
      if (e.pa_score) ++bins[std::min<std::size_t>(4, static_cast<std::size_t>((*e.pa_score - 5) / 4))];
  EXPECT_LT(bins[0], bins[1]);
  EXPECT_LT(bins[1], bins[2]);
  EXPECT_GT(bins[2], bins[3]);
  EXPECT_GT(bins[3], bins[4]);
}

TEST(SynthCohort, OutputIsByteIdenticalForAFixedSpec) {
  CohortSpec s;
  s.participants = 3;
  s.days = 2;
  s.include_rr = s.include_phone = s.include_sleep = s.include_location = true;
  const fs::path a = scratch("a"), b = scratch("b");
  generate_cohort(s, a);
  generate_cohort(s, b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path other = b / fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
    ++files;
  }
  EXPECT_GE(files, 3u * 8u + 2u);
  s.seed = 2;
  const fs::path c = scratch("c");
  generate_cohort(s, c);
  EXPECT_NE(slurp(a / "P001" / "ema.csv"), slurp(c / "P001" / "ema.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(SynthCohort, WrittenCohortAndTruthReadBackExactly) {
  CohortSpec s;
  s.participants = 2;
  s.days = 2;
  s.utc_offset_minutes = -300;
  const fs::path dir = scratch("rt");
  const auto sc = generate_cohort(s, dir);
  EXPECT_TRUE(cohort_truth(dir) == sc.truth);
  const Cohort back = ingest(dir, load_schema(dir / "schema.json"));
  EXPECT_TRUE(back == sc.cohort);
  fs::remove(dir / "cohort_spec.json");
  EXPECT_THROW(cohort_truth(dir), std::runtime_error);
  fs::remove_all(dir);
}

TEST(SynthCohort, SpecJsonRoundTripAndValidation) {
  CohortSpec s;
  s.participants = 7;
  s.coupling = -0.4;
  s.include_phone = true;
  s.start_date = "2023-11-02";
  EXPECT_TRUE(cohort_spec_from_json(cohort_spec_to_json(s)) == s);
  CohortSpec bad;
  bad.base_rate = 1.5;
  EXPECT_THROW(bad.validate(), std::exception);
  bad = CohortSpec{};
  bad.participants = 0;
  EXPECT_THROW(bad.validate(), std::exception);
}
