#include "emasched/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "emasched/io.hpp"
#include "emasched/rng.hpp"

namespace emasched {

std::string to_string(UncertaintyNorm n) { return n == UncertaintyNorm::Raw ? "raw" : "window_minmax"; }

UncertaintyNorm parse_uncertainty_norm(std::string_view s) {
  if (s == "raw") return UncertaintyNorm::Raw;
  if (s == "window_minmax") return UncertaintyNorm::WindowMinMax;
  throw std::invalid_argument("unknown uncertainty normalisation '" + std::string(s) + "'");
}

void TriggerConfig::validate() const {
  if (!(w_u >= 0.0)) throw ConfigError("trigger.w_u", "weight must be non-negative");
  if (!(w_r >= 0.0)) throw ConfigError("trigger.w_r", "weight must be non-negative");
  if (!(w_u + w_r > 0.0)) throw ConfigError("trigger", "w_u + w_r must be positive");
  if (windows < 1) throw ConfigError("trigger.windows", "must be >= 1");
  if (window_minutes < 1) throw ConfigError("trigger.window_minutes", "must be >= 1");
  if (step_minutes < 1 || step_minutes > window_minutes)
    throw ConfigError("trigger.step_minutes", "must be in [1, window_minutes]");
  if (day_start_minute < 0 || day_start_minute + windows * window_minutes > 36 * 60)
    throw ConfigError("trigger.day_start_minute", "windows must fit within the day");
}

double objective_j(double u, double r, const TriggerConfig& cfg) {
  if (cfg.w_u < 0.0 || cfg.w_r < 0.0) throw ConfigError("trigger", "weights must be non-negative");
  return cfg.w_u * u * u + cfg.w_r * r * r;
}

std::vector<double> normalize_uncertainty(std::span<const double> variances, UncertaintyNorm norm) {
  std::vector<double> out(variances.begin(), variances.end());
  if (norm == UncertaintyNorm::Raw || out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double a = *lo, b = *hi;
  for (double& v : out) v = b > a ? (v - a) / (b - a) : 0.5;
  return out;
}

std::string to_string(Policy p) { return p == Policy::Smart ? "smart" : "random"; }

TriggerDecision select_smart(std::span<const Candidate> candidates, const TriggerConfig& cfg) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to choose from");
  std::vector<double> var;
  for (const auto& c : candidates) var.push_back(c.output.emo_var);
  const auto u = normalize_uncertainty(var, cfg.norm);
  TriggerDecision d;
  d.policy = Policy::Smart;
  bool first = true;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double j = objective_j(u[i], candidates[i].output.r_prob, cfg);
    const bool better = first || j > d.j_value || (j == d.j_value && candidates[i].time < d.time);
    if (better) {
      d.j_value = j;
      d.time = candidates[i].time;
      d.candidate = i;
      first = false;
    }
  }
  return d;
}

std::size_t select_random(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("no candidates to choose from");
  Rng rng(seed);
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<SchedulingWindow> scheduling_windows(std::int64_t local_day, int utc_offset_minutes,
                                                 const TriggerConfig& cfg) {
  const Timestamp midnight = local_midnight(local_day, utc_offset_minutes);
  std::vector<SchedulingWindow> out;
  for (int w = 0; w < cfg.windows; ++w) {
    SchedulingWindow sw;
    sw.index = w;
    sw.start = midnight.plus_minutes(cfg.day_start_minute + w * cfg.window_minutes);
    sw.end = sw.start.plus_minutes(cfg.window_minutes);
    out.push_back(sw);
  }
  return out;
}

std::vector<Timestamp> candidate_times(const SchedulingWindow& w, const TriggerConfig& cfg) {
  std::vector<Timestamp> out;
  for (Timestamp t = w.start; t < w.end; t = t.plus_minutes(cfg.step_minutes)) out.push_back(t);
  return out;
}

std::string to_string(OutcomeSource s) {
  switch (s) {
    case OutcomeSource::ModelBernoulli: return "model_bernoulli";
    case OutcomeSource::ModelThreshold: return "model_threshold";
    case OutcomeSource::GenerativeTruth: return "generative_truth";
  }
  return "model_bernoulli";
}

OutcomeSource parse_outcome_source(std::string_view s) {
  if (s == "model_bernoulli") return OutcomeSource::ModelBernoulli;
  if (s == "model_threshold") return OutcomeSource::ModelThreshold;
  if (s == "generative_truth") return OutcomeSource::GenerativeTruth;
  throw std::invalid_argument("unknown outcome source '" + std::string(s) + "'");
}

namespace {

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

bool draw_outcome(const SegmentPrediction& p, OutcomeSource source, Rng& rng) {
  switch (source) {
    case OutcomeSource::ModelThreshold: return p.output.r_prob >= 0.5;
    case OutcomeSource::ModelBernoulli: return uniform01(rng) < p.output.r_prob;
    case OutcomeSource::GenerativeTruth:
      if (!p.truth_p_resp) throw std::invalid_argument("generative-truth outcomes need planted response probabilities");
      return uniform01(rng) < *p.truth_p_resp;
  }
  return false;
}

}  // namespace

SimulationResult simulate_triggers(std::span<const SegmentPrediction> predictions,
                                   const std::map<std::string, int>& utc_offsets, const TriggerConfig& cfg,
                                   OutcomeSource source, std::uint64_t seed) {
  cfg.validate();
  std::map<std::string, std::unordered_map<std::int64_t, std::size_t>> by_participant;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    by_participant[predictions[i].participant][predictions[i].start.seconds] = i;

  SimulationResult result;
  for (const auto& [pid, index] : by_participant) {
    const auto off_it = utc_offsets.find(pid);
    const int offset = off_it == utc_offsets.end() ? 0 : off_it->second;
    std::set<std::int64_t> days;
    for (const auto& [start, i] : index) days.insert(local_day_number(predictions[i].start, offset));

    ParticipantSimulation ps;
    ps.participant = pid;
    std::vector<double> pa[2];
    const std::uint64_t pkey = fnv1a64(pid);
    for (std::int64_t day : days) {
      for (const auto& w : scheduling_windows(day, offset, cfg)) {
        std::vector<Candidate> cands;
        std::vector<std::size_t> rows;
        for (Timestamp t : candidate_times(w, cfg)) {
          auto it = index.find(t.seconds);
          if (it == index.end()) continue;
          cands.push_back({t, predictions[it->second].output});
          rows.push_back(it->second);
        }
        const int study_day = rows.empty() ? 0 : predictions[rows.front()].study_day;
        if (cands.empty()) {
          result.skipped.push_back(pid + " day " + format_date(day) + " window " + std::to_string(w.index) +
                                   ": no feature coverage");
          continue;
        }
        std::vector<double> var;
        for (const auto& c : cands) var.push_back(c.output.emo_var);
        const auto u = normalize_uncertainty(var, cfg.norm);

        for (Policy policy : {Policy::Smart, Policy::Random}) {
          const std::uint64_t pol = policy == Policy::Smart ? 0 : 1;
          TriggerDecision d;
          if (policy == Policy::Smart) {
            d = select_smart(cands, cfg);
          } else {
            d.policy = Policy::Random;
            d.candidate = select_random(cands.size(), derive_seed(seed, {pkey, static_cast<std::uint64_t>(day),
                                                                         static_cast<std::uint64_t>(w.index), 2}));
            d.time = cands[d.candidate].time;
            d.j_value = objective_j(u[d.candidate], cands[d.candidate].output.r_prob, cfg);
          }
          d.participant = pid;
          d.day = study_day;
          d.window = w.index;
          const SegmentPrediction& chosen = predictions[rows[d.candidate]];
          Rng rng = make_rng(seed, {pkey, static_cast<std::uint64_t>(day), static_cast<std::uint64_t>(w.index), pol});
          DecisionRecord rec;
          rec.decision = d;
          rec.output = chosen.output;
          rec.u_normalized = u[d.candidate];
          rec.responded = draw_outcome(chosen, source, rng);
          rec.truth_pa = chosen.truth_pa;
          PolicySummary& s = policy == Policy::Smart ? ps.smart : ps.random;
          s.decisions += 1;
          s.responses += rec.responded;
          pa[pol].push_back(chosen.output.emo_mean);
          result.decisions.push_back(std::move(rec));
        }
      }
    }
    for (int k = 0; k < 2; ++k) {
      PolicySummary& s = k == 0 ? ps.smart : ps.random;
      s.response_rate = s.decisions ? static_cast<double>(s.responses) / static_cast<double>(s.decisions) : 0.0;
      s.predicted_pa_variance = sample_variance(pa[k]);
    }
    if (ps.smart.decisions > 0) result.participants.push_back(std::move(ps));
  }
  return result;
}

Json simulation_to_json(const SimulationResult& r) {
  Json decisions = Json::array();
  for (const auto& d : r.decisions) {
    Json j{{"participant", d.decision.participant},
           {"day", d.decision.day},
           {"window", d.decision.window},
           {"policy", to_string(d.decision.policy)},
           {"time", d.decision.time.seconds},
           {"j", d.decision.j_value},
           {"r_prob", d.output.r_prob},
           {"emo_mean", d.output.emo_mean},
           {"emo_var", d.output.emo_var},
           {"u", d.u_normalized},
           {"responded", d.responded}};
    if (d.truth_pa) j["truth_pa"] = *d.truth_pa;
    decisions.push_back(std::move(j));
  }
  Json participants = Json::array();
  for (const auto& p : r.participants) {
    participants.push_back(Json{{"participant", p.participant},
                                {"smart_decisions", p.smart.decisions},
                                {"smart_responses", p.smart.responses},
                                {"smart_rate", p.smart.response_rate},
                                {"smart_pa_variance", p.smart.predicted_pa_variance},
                                {"random_decisions", p.random.decisions},
                                {"random_responses", p.random.responses},
                                {"random_rate", p.random.response_rate},
                                {"random_pa_variance", p.random.predicted_pa_variance}});
  }
  return Json{{"decisions", decisions}, {"participants", participants}, {"skipped", r.skipped}};
}

SimulationResult simulation_from_json(const Json& j) {
  SimulationResult r;
  try {
    for (const auto& d : j.at("decisions")) {
      DecisionRecord rec;
      rec.decision.participant = d.at("participant").get<std::string>();
      rec.decision.day = d.at("day").get<int>();
      rec.decision.window = d.at("window").get<int>();
      rec.decision.policy = d.at("policy").get<std::string>() == "smart" ? Policy::Smart : Policy::Random;
      rec.decision.time = Timestamp{d.at("time").get<std::int64_t>()};
      rec.decision.j_value = d.at("j").get<double>();
      rec.output = {d.at("r_prob").get<double>(), d.at("emo_mean").get<double>(), d.at("emo_var").get<double>()};
      rec.u_normalized = d.at("u").get<double>();
      rec.responded = d.at("responded").get<bool>();
      if (d.contains("truth_pa")) rec.truth_pa = d.at("truth_pa").get<double>();
      r.decisions.push_back(std::move(rec));
    }
    for (const auto& p : j.at("participants")) {
      ParticipantSimulation ps;
      ps.participant = p.at("participant").get<std::string>();
      ps.smart = {p.at("smart_decisions").get<std::size_t>(), p.at("smart_responses").get<std::size_t>(),
                  p.at("smart_rate").get<double>(), p.at("smart_pa_variance").get<double>()};
      ps.random = {p.at("random_decisions").get<std::size_t>(), p.at("random_responses").get<std::size_t>(),
                   p.at("random_rate").get<double>(), p.at("random_pa_variance").get<double>()};
      r.participants.push_back(std::move(ps));
    }
    r.skipped = j.at("skipped").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw std::runtime_error(std::string("malformed simulation record: ") + e.what());
  }
  return r;
}

std::string simulation_summary_csv(const SimulationResult& r) {
  std::string out =
      "participant_id,smart_decisions,smart_response_rate,random_response_rate,smart_pa_variance,random_pa_variance\n";
  for (const auto& p : r.participants) {
    out += p.participant + "," + std::to_string(p.smart.decisions) + "," + format_double(p.smart.response_rate) + "," +
           format_double(p.random.response_rate) + "," + format_double(p.smart.predicted_pa_variance) + "," +
           format_double(p.random.predicted_pa_variance) + "\n";
  }
  return out;
}

}  // namespace emasched
