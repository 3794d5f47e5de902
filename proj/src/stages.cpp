#include "emasched/stages.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "emasched/io.hpp"

namespace fs = std::filesystem;

namespace emasched {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Generate: return "generate";
    case Stage::Label: return "label";
    case Stage::Features: return "features";
    case Stage::Train: return "train";
    case Stage::Simulate: return "simulate";
    case Stage::Evaluate: return "evaluate";
    case Stage::Report: return "report";
  }
  return "generate";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : pipeline_stages())
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> all = {Stage::Generate, Stage::Label,    Stage::Features, Stage::Train,
                                         Stage::Simulate, Stage::Evaluate, Stage::Report};
  return all;
}

namespace {

using HashMap = std::map<std::string, std::string>;

std::string hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, dir).generic_string() + "=" + hash_file(f) + "\n";
  return hex64(fnv1a64(acc));
}

Json load_json(const fs::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw StageError(path.string() + ": malformed JSON: " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

class Manifest {
 public:
  explicit Manifest(fs::path out) : path_(std::move(out) / artifacts::kManifest) {
    if (fs::exists(path_)) doc_ = load_json(path_);
    if (!doc_.is_object()) doc_ = Json::object();
    doc_["schema_version"] = 1;
    if (!doc_.contains("stages")) doc_["stages"] = Json::object();
  }

  const Json* entry(Stage s) const {
    const auto& st = doc_["stages"];
    auto it = st.find(to_string(s));
    return it == st.end() ? nullptr : &*it;
  }

  void record(Stage s, const std::string& config_hash, const HashMap& inputs, const HashMap& outputs) {
    doc_["stages"][to_string(s)] = Json{{"config_hash", config_hash}, {"inputs", inputs}, {"outputs", outputs}};
    write_file_atomic(path_, dump(doc_));
  }

  const Json& stages() const { return doc_["stages"]; }

 private:
  fs::path path_;
  Json doc_;
};

struct Context {
  const RunConfig& cfg;
  std::ostream& log;
  fs::path out;
  std::string hash;
  Stage stage;

  fs::path at(std::string_view name) const { return out / name; }
  void say(const std::string& msg) const { log << "[" << to_string(stage) << "] " << msg << "\n"; }
};

void require_file(const Context& c, const fs::path& path, Stage producer) {
  if (!fs::exists(path))
    throw StageError("stage '" + to_string(c.stage) + "' needs " + path.string() + "; run '" + to_string(producer) +
                     "' first");
}

void require_cohort(const Context& c) {
  const fs::path dir = c.cfg.cohort_path();
  if (!fs::exists(dir / "schema.json"))
    throw StageError("stage '" + to_string(c.stage) + "' needs a cohort at " + dir.string() +
                     "; run 'generate' first or set paths.cohort");
}

Cohort load_cohort(const RunConfig& cfg) {
  const fs::path dir = cfg.cohort_path();
  return ingest(dir, load_schema(dir / "schema.json"));
}

std::map<std::string, int> offsets_of(const Cohort& cohort) {
  std::map<std::string, int> out;
  for (const auto& p : cohort.participants) out[p.id] = p.utc_offset_minutes;
  return out;
}

// --------------------------------------------------------------------------
// stage bodies; each returns the written output files relative to `out`

std::vector<std::string> do_generate(const Context& c) {
  const fs::path dir = c.cfg.cohort_path();
  if (fs::exists(dir)) {
    const bool ours = fs::exists(dir / "cohort_spec.json") || fs::is_empty(dir);
    if (!ours) throw StageError("refusing to overwrite " + dir.string() + ": it is not a generated cohort");
    fs::remove_all(dir);
  }
  const SyntheticCohort sc = generate_cohort(c.cfg.cohort, dir);
  c.say("generated " + std::to_string(sc.cohort.participants.size()) + " participants x " +
        std::to_string(c.cfg.cohort.days) + " days");
  return {};
}

std::vector<std::string> do_label(const Context& c) {
  require_cohort(c);
  const Cohort cohort = load_cohort(c.cfg);
  const int width = c.cfg.experiment.features.segment_width_minutes;
  std::vector<LabeledSegment> all;
  for (const auto& p : cohort.participants) {
    const auto segs = segment_windows(p, width);
    const auto labeled = label_receptivity(segs, p.events, width, c.cfg.experiment.labeling);
    all.insert(all.end(), labeled.begin(), labeled.end());
  }
  const auto dist = label_distribution(all);
  c.say(std::to_string(dist.receptive) + " receptive, " + std::to_string(dist.non_receptive) + " non-receptive, " +
        std::to_string(dist.unlabeled) + " unlabeled segments");
  write_file_atomic(c.at(artifacts::kLabels), labels_to_csv(all));
  return {artifacts::kLabels};
}

std::vector<std::string> do_features(const Context& c) {
  require_cohort(c);
  const Cohort cohort = load_cohort(c.cfg);
  const FeatureTable table = extract_features(cohort, c.cfg.experiment.features);
  c.say(std::to_string(table.rows()) + " segments x " + std::to_string(table.cols()) + " features");
  write_file_atomic(c.at(artifacts::kFeatures), features_to_csv(table));
  return {artifacts::kFeatures};
}

Json cv_plan_json(const CvPlan& plan, const CrossValidation& cv, const std::string& hash) {
  Json folds = Json::array();
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const auto& f = plan.folds[k];
    const auto& r = cv.folds[k];
    folds.push_back(Json{{"fold", k},
                         {"test_participants", f.test_participants},
                         {"test_day", f.test_day == 0 ? Json(nullptr) : Json(f.test_day)},
                         {"train_rows", f.train.size()},
                         {"test_rows", f.test.size()},
                         {"train_labeled", r.train_labeled},
                         {"train_pa", r.train_pa},
                         {"trained", r.trained},
                         {"note", r.note}});
  }
  return Json{{"schema_version", 1}, {"config_hash", hash}, {"mode", to_string(plan.mode)}, {"folds", folds}};
}

std::vector<std::string> do_train(const Context& c) {
  require_file(c, c.at(artifacts::kFeatures), Stage::Features);
  require_file(c, c.at(artifacts::kLabels), Stage::Label);
  require_cohort(c);
  const auto& ex = c.cfg.experiment;
  const FeatureTable table = features_from_csv(c.at(artifacts::kFeatures));
  const auto labels = align_labels(table, labels_from_csv(c.at(artifacts::kLabels)));
  const Cohort cohort = load_cohort(c.cfg);
  const Eigen::MatrixXd normalized = normalize_rows(table);
  const auto candidates = candidate_rows(cohort, table, ex.trigger);
  std::vector<bool> predict(table.rows(), false);
  for (auto r : candidates) predict[r] = true;
  const CvPlan plan = make_cv_plan(table, ex.cv_mode, ex.cv_groups);
  const CrossValidation cv = cross_validate(table, normalized, labels, predict, ex);

  std::vector<std::string> outputs;
  const fs::path models = c.at(artifacts::kModels);
  fs::remove_all(models);
  fs::create_directories(models);
  std::size_t m = 0;
  for (std::size_t k = 0; k < cv.folds.size(); ++k) {
    if (!cv.folds[k].trained) {
      c.say("fold " + std::to_string(k) + " skipped: " + cv.folds[k].note);
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof name, "fold_%03zu", k);
    const std::string rec = std::string(artifacts::kModels) + "/" + name + "_receptivity.json";
    const std::string emo = std::string(artifacts::kModels) + "/" + name + "_emotion.json";
    save_model(cv.receptivity_models[m], c.at(rec));
    save_model(cv.emotion_models[m], c.at(emo));
    outputs.push_back(rec);
    outputs.push_back(emo);
    ++m;
  }
  write_file_atomic(c.at(artifacts::kCvPlan), dump(cv_plan_json(plan, cv, c.hash)));
  write_file_atomic(c.at(artifacts::kPredictions), predictions_to_csv(table, cv));
  c.say(std::to_string(m) + " of " + std::to_string(cv.folds.size()) + " folds trained (" + to_string(ex.cv_mode) + ")");
  outputs.push_back(artifacts::kCvPlan);
  outputs.push_back(artifacts::kPredictions);
  return outputs;
}

std::vector<std::string> do_simulate(const Context& c) {
  require_file(c, c.at(artifacts::kPredictions), Stage::Train);
  require_file(c, c.at(artifacts::kFeatures), Stage::Features);
  require_cohort(c);
  const auto& ex = c.cfg.experiment;
  const FeatureTable table = features_from_csv(c.at(artifacts::kFeatures));
  const CrossValidation cv = predictions_from_csv(c.at(artifacts::kPredictions), table);
  const Cohort cohort = load_cohort(c.cfg);
  std::optional<CohortTruth> truth;
  if (ex.outcome_source == OutcomeSource::GenerativeTruth) {
    try {
      truth = cohort_truth(c.cfg.cohort_path());
    } catch (const std::exception& e) {
      throw StageError(std::string("outcome source generative_truth needs planted truth files: ") + e.what() +
                       "; use model_bernoulli or model_threshold for observed cohorts");
    }
  }
  const auto candidates = candidate_rows(cohort, table, ex.trigger);
  const auto preds = segment_predictions(table, candidates, cv, truth ? &*truth : nullptr);
  const SimulationResult sim = simulate_triggers(preds, offsets_of(cohort), ex.trigger, ex.outcome_source, ex.seed);
  for (const auto& s : sim.skipped) c.say("skipped " + s);
  Json j = simulation_to_json(sim);
  j["schema_version"] = 1;
  j["config_hash"] = c.hash;
  j["outcome_source"] = to_string(ex.outcome_source);
  write_file_atomic(c.at(artifacts::kSimulation), dump(j));
  write_file_atomic(c.at(artifacts::kSimulationSummary), simulation_summary_csv(sim));
  c.say(std::to_string(sim.decisions.size()) + " decisions for " + std::to_string(sim.participants.size()) +
        " participants");
  return {artifacts::kSimulation, artifacts::kSimulationSummary};
}

std::string j_by_response_csv(const JByResponse& box) {
  std::string out = "status,j\n";
  for (double v : box.responded) out += "responded," + format_double(v) + "\n";
  for (double v : box.missed) out += "missed," + format_double(v) + "\n";
  return out;
}

std::vector<std::string> do_evaluate(const Context& c) {
  require_file(c, c.at(artifacts::kPredictions), Stage::Train);
  require_file(c, c.at(artifacts::kFeatures), Stage::Features);
  require_file(c, c.at(artifacts::kLabels), Stage::Label);
  require_cohort(c);
  const auto& ex = c.cfg.experiment;
  const FeatureTable table = features_from_csv(c.at(artifacts::kFeatures));
  const auto labels = align_labels(table, labels_from_csv(c.at(artifacts::kLabels)));
  const CrossValidation cv = predictions_from_csv(c.at(artifacts::kPredictions), table);
  const Cohort cohort = load_cohort(c.cfg);
  std::optional<SimulationResult> sim;
  if (fs::exists(c.at(artifacts::kSimulation))) {
    sim = simulation_from_json(load_json(c.at(artifacts::kSimulation)));
  } else {
    c.say("no simulation results; RQ3 statistics left empty (run 'simulate' first to include them)");
  }
  const MetricsReport metrics = compute_metrics(table, labels, cv);
  const auto candidates = candidate_rows(cohort, table, ex.trigger);
  const JTable jt = compute_j_table(cohort, table, candidates, cv, ex.trigger);
  const RowIndex index(cohort, table);
  const StatsReport stats = compute_stats(cohort, table, index, jt, sim ? &*sim : nullptr, ex);
  for (const auto& n : stats.rq1.notes) c.say("RQ1: " + n);
  for (const auto& n : stats.rq2.notes) c.say("RQ2: " + n);
  for (const auto& n : stats.rq3.notes) c.say("RQ3: " + n);

  Json mj = metrics_to_json(metrics);
  mj["schema_version"] = 1;
  mj["config_hash"] = c.hash;
  Json sj = stats_to_json(stats);
  sj["schema_version"] = 1;
  sj["config_hash"] = c.hash;
  write_file_atomic(c.at(artifacts::kMetrics), dump(mj));
  write_file_atomic(c.at(artifacts::kStats), dump(sj));
  write_file_atomic(c.at(artifacts::kCurve), curve_to_csv(stats.rq2.pa_curve));
  write_file_atomic(c.at(artifacts::kAbsZCurve), curve_to_csv(stats.rq2.abs_z_curve));
  write_file_atomic(c.at(artifacts::kJByResponse), j_by_response_csv(stats.box));
  return {artifacts::kMetrics, artifacts::kStats, artifacts::kCurve, artifacts::kAbsZCurve, artifacts::kJByResponse};
}

void check_consistent_hashes(const Context& c) {
  std::map<std::string, std::string> seen;  // artifact -> hash
  for (const char* name : {artifacts::kMetrics, artifacts::kStats, artifacts::kSimulation, artifacts::kCvPlan}) {
    if (!fs::exists(c.at(name))) continue;
    const Json j = load_json(c.at(name));
    if (j.contains("config_hash")) seen[name] = j.at("config_hash").get<std::string>();
  }
  std::set<std::string> distinct;
  for (const auto& [k, v] : seen) distinct.insert(v);
  if (distinct.size() > 1) {
    std::string detail;
    for (const auto& [k, v] : seen) detail += (detail.empty() ? "" : ", ") + k + "=" + v;
    throw StageError("artifacts were produced by different configurations (" + detail +
                     "); re-run the affected stages with one config");
  }
}

std::vector<std::string> do_report(const Context& c) {
  check_consistent_hashes(c);
  fs::create_directories(c.at(artifacts::kReportDir));
  write_file_atomic(c.at(artifacts::kReport), render_report(c.out, c.cfg.report.title));
  std::vector<std::string> outputs = {artifacts::kReport};

  // machine tables
  if (fs::exists(c.at(artifacts::kMetrics))) {
    const Json m = load_json(c.at(artifacts::kMetrics));
    std::string csv = "model,metric,mean,sd,n\n";
    for (const auto& [key, v] : m.at("aggregate").items()) {
      const auto dot = key.find('.');
      csv += key.substr(0, dot) + "," + key.substr(dot + 1) + "," + format_double(v.at("mean").get<double>()) + "," +
             format_double(v.at("sd").get<double>()) + "," + std::to_string(v.at("n").get<std::size_t>()) + "\n";
    }
    write_file_atomic(c.at("report/model_metrics.csv"), csv);
    outputs.push_back("report/model_metrics.csv");
  }
  if (fs::exists(c.at(artifacts::kStats))) {
    const Json s = load_json(c.at(artifacts::kStats));
    std::string csv = "analysis,statistic,value,p\n";
    auto num = [](const Json& v) { return v.is_number() ? format_double(v.get<double>()) : std::string(); };
    auto add_lmm = [&](const std::string& name, const Json& l) {
      if (l.is_null()) return;
      csv += name + ",beta1," + num(l.at("beta1")) + "," + num(l.at("p")) + "\n";
    };
    auto add_test = [&](const std::string& name, const std::string& stat, const Json& t) {
      if (t.is_null()) return;
      csv += name + "," + stat + "," + num(t.at("statistic")) + "," + num(t.at("p")) + "\n";
    };
    add_lmm("rq1_mixed_model", s.at("rq1").at("lmm"));
    if (!s.at("rq1").at("repeated_measures").is_null()) {
      const auto& rm = s.at("rq1").at("repeated_measures");
      csv += "rq1_repeated_measures,F," + num(rm.at("F")) + "," + num(rm.at("p")) + "\n";
    }
    add_lmm("rq2_mixed_model", s.at("rq2").at("lmm"));
    add_test("rq3_response_rate", "t", s.at("rq3").at("response_rate_t"));
    add_test("rq3_pa_variance", "t", s.at("rq3").at("pa_variance_t"));
    add_test("rq3_predicted_pa_ks", "D", s.at("rq3").at("ks_predicted_pa"));
    write_file_atomic(c.at("report/tests.csv"), csv);
    outputs.push_back("report/tests.csv");
  }
  for (const char* name : {artifacts::kCurve, artifacts::kAbsZCurve, artifacts::kJByResponse}) {
    if (!fs::exists(c.at(name))) continue;
    const std::string dest = std::string(artifacts::kReportDir) + "/" + name;
    write_file_atomic(c.at(dest), read_text_file(c.at(name)));
    outputs.push_back(dest);
  }
  c.say("wrote " + c.at(artifacts::kReport).string());
  return outputs;
}

// inputs whose hashes decide whether a stage is up to date
HashMap stage_inputs(const Context& c) {
  HashMap in;
  auto add_file = [&](const char* name) {
    if (fs::exists(c.at(name))) in[name] = hash_file(c.at(name));
  };
  auto add_cohort = [&] {
    if (fs::exists(c.cfg.cohort_path())) in["cohort"] = hash_directory(c.cfg.cohort_path());
  };
  switch (c.stage) {
    case Stage::Generate: break;
    case Stage::Label:
    case Stage::Features: add_cohort(); break;
    case Stage::Train:
      add_cohort();
      add_file(artifacts::kFeatures);
      add_file(artifacts::kLabels);
      break;
    case Stage::Simulate:
      add_cohort();
      add_file(artifacts::kFeatures);
      add_file(artifacts::kPredictions);
      break;
    case Stage::Evaluate:
      add_cohort();
      add_file(artifacts::kFeatures);
      add_file(artifacts::kLabels);
      add_file(artifacts::kPredictions);
      add_file(artifacts::kSimulation);
      break;
    case Stage::Report:
      for (const char* n : {artifacts::kMetrics, artifacts::kStats, artifacts::kSimulation, artifacts::kCurve,
                            artifacts::kAbsZCurve, artifacts::kJByResponse, artifacts::kCvPlan})
        add_file(n);
      break;
  }
  return in;
}

HashMap output_hashes(const Context& c, const std::vector<std::string>& outputs) {
  HashMap h;
  for (const auto& o : outputs) h[o] = hash_file(c.at(o));
  if (c.stage == Stage::Generate) h["cohort"] = hash_directory(c.cfg.cohort_path());
  return h;
}

bool up_to_date(const Context& c, const Json* entry, const HashMap& inputs) {
  if (!entry || entry->value("config_hash", "") != c.hash) return false;
  if (entry->at("inputs").get<HashMap>() != inputs) return false;
  for (const auto& [name, hash] : entry->at("outputs").get<HashMap>()) {
    if (name == "cohort" && c.stage == Stage::Generate) {
      if (!fs::exists(c.cfg.cohort_path()) || hash_directory(c.cfg.cohort_path()) != hash) return false;
      continue;
    }
    if (!fs::exists(c.at(name)) || hash_file(c.at(name)) != hash) return false;
  }
  return true;
}

}  // namespace

std::vector<LabeledSegment> align_labels(const FeatureTable& table, const std::vector<LabeledSegment>& labels) {
  std::map<std::pair<std::string, std::int64_t>, const LabeledSegment*> by_key;
  for (const auto& l : labels) by_key[{l.segment.participant_id, l.segment.start.seconds}] = &l;
  std::vector<LabeledSegment> out(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    auto it = by_key.find({s.participant_id, s.start.seconds});
    if (it != by_key.end()) out[r] = *it->second;
    out[r].segment = s;
  }
  return out;
}

std::string predictions_to_csv(const FeatureTable& table, const CrossValidation& cv) {
  std::string out =
      "participant_id,segment_start,study_day,r_prob,emo_mean,emo_var,nb_prob,bernoulli_draw,gaussian_draw,ols_pred\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (!cv.outputs[r]) continue;
    const auto& s = table.segments[r];
    const auto& o = *cv.outputs[r];
    out += s.participant_id + "," + std::to_string(s.start.seconds) + "," + std::to_string(s.study_day) + "," +
           format_double(o.r_prob) + "," + format_double(o.emo_mean) + "," + format_double(o.emo_var) + "," +
           opt(cv.nb_prob[r]) + "," + (cv.bernoulli_draw[r] ? std::to_string(*cv.bernoulli_draw[r]) : "") + "," +
           opt(cv.gaussian_draw[r]) + "," + opt(cv.ols_pred[r]) + "\n";
  }
  return out;
}

CrossValidation predictions_from_csv(const fs::path& path, const FeatureTable& table) {
  const CsvTable t = read_csv(path);
  require_header(t, {"participant_id", "segment_start", "study_day", "r_prob", "emo_mean", "emo_var", "nb_prob",
                     "bernoulli_draw", "gaussian_draw", "ols_pred"});
  std::map<std::pair<std::string, std::int64_t>, std::size_t> rows;
  for (std::size_t r = 0; r < table.rows(); ++r) rows[{table.segments[r].participant_id, table.segments[r].start.seconds}] = r;
  CrossValidation cv;
  const std::size_t n = table.rows();
  cv.outputs.assign(n, std::nullopt);
  cv.nb_prob.assign(n, std::nullopt);
  cv.bernoulli_draw.assign(n, std::nullopt);
  cv.gaussian_draw.assign(n, std::nullopt);
  cv.ols_pred.assign(n, std::nullopt);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = t.where(i);
    auto it = rows.find({row[0], parse_int(row[1], where)});
    if (it == rows.end()) throw StageError(where + ": prediction for a segment absent from the feature table");
    const auto r = it->second;
    cv.outputs[r] = ModelOutput{parse_double(row[3], where), parse_double(row[4], where), parse_double(row[5], where)};
    cv.nb_prob[r] = parse_optional_double(row[6], where);
    if (!row[7].empty()) cv.bernoulli_draw[r] = static_cast<int>(parse_int(row[7], where));
    cv.gaussian_draw[r] = parse_optional_double(row[8], where);
    cv.ols_pred[r] = parse_optional_double(row[9], where);
  }
  return cv;
}

namespace {

std::string fmt(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_p(double p) {
  if (p < 1e-4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", p);
    return buf;
  }
  return fmt(p, 4);
}

std::string missing(const std::string& what, const std::string& stage) {
  return "_Missing section: " + what + " not available. Run `emasched " + stage + "` to produce it._\n";
}

std::string mean_sd_cell(const Json& agg, const std::string& key) {
  if (!agg.contains(key)) return "n/a";
  const auto& v = agg.at(key);
  return fmt(v.at("mean").get<double>()) + " (" + fmt(v.at("sd").get<double>()) + ")";
}

std::string comparison_lines(const Json& metrics, const std::string& metric) {
  std::string out;
  for (const auto& c : metrics.at("comparisons")) {
    if (c.at("metric").get<std::string>() != metric) continue;
    out += "- " + c.at("model_a").get<std::string>() + " vs " + c.at("model_b").get<std::string>() + ": ";
    if (c.at("F").is_null()) {
      out += "not computed (" + c.at("note").get<std::string>() + ")\n";
    } else {
      out += "F(1, " + std::to_string(c.at("participants").get<std::size_t>() - 1) + ") = " +
             fmt(c.at("F").get<double>(), 2) + ", p = " + fmt_p(c.at("p").get<double>()) + "\n";
    }
  }
  return out;
}

std::string lmm_lines(const Json& l) {
  return "- beta1 = " + fmt(l.at("beta1").get<double>(), 4) + " (SE " + fmt(l.at("se_beta1").get<double>(), 4) +
         ", 95% CI [" + fmt(l.at("ci95")[0].get<double>(), 4) + ", " + fmt(l.at("ci95")[1].get<double>(), 4) +
         "]), z = " + fmt(l.at("z").get<double>(), 2) + ", p = " + fmt_p(l.at("p").get<double>()) + "\n" +
         "- intercept = " + fmt(l.at("beta0").get<double>(), 4) + ", participant variance = " +
         fmt(l.at("sigma_u2").get<double>(), 4) + ", residual variance = " + fmt(l.at("sigma_e2").get<double>(), 4) +
         "\n- " + std::to_string(l.at("observations").get<std::size_t>()) + " observations from " +
         std::to_string(l.at("groups").get<std::size_t>()) + " participants\n";
}

std::string notes_lines(const Json& notes) {
  std::string out;
  for (const auto& n : notes) out += "- note: " + n.get<std::string>() + "\n";
  return out;
}

std::string box_summary(const std::vector<double>& v) {
  if (v.empty()) return "| 0 | n/a | n/a | n/a | n/a | n/a |";
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return "| " + std::to_string(v.size()) + " | " + fmt(*lo) + " | " + fmt(percentile(v, 25)) + " | " +
         fmt(percentile(v, 50)) + " | " + fmt(percentile(v, 75)) + " | " + fmt(*hi) + " |";
}

}  // namespace

std::string render_report(const fs::path& out_dir, const std::string& title) {
  auto path = [&](const char* n) { return out_dir / n; };
  std::optional<Json> metrics, stats, sim;
  if (fs::exists(path(artifacts::kMetrics))) metrics = load_json(path(artifacts::kMetrics));
  if (fs::exists(path(artifacts::kStats))) stats = load_json(path(artifacts::kStats));
  if (fs::exists(path(artifacts::kSimulation))) sim = load_json(path(artifacts::kSimulation));

  std::string hash = "unknown";
  for (const auto* j : {&metrics, &stats, &sim})
    if (*j && (*j)->contains("config_hash")) hash = (**j).at("config_hash").get<std::string>();

  std::ostringstream md;
  md << "# " << title << "\n\nConfig hash: `" << hash << "`\n\n";

  md << "## 1. Receptivity model\n\n";
  if (metrics) {
    const auto& agg = metrics->at("aggregate");
    md << "Participant-level mean (SD).\n\n| Model | Weighted F1 | Accuracy | Weighted precision |\n|---|---|---|---|\n";
    for (auto [key, label] : {std::pair{"nn", "Neural network"}, {"naive_bayes", "Naive Bayes"}, {"random", "Random"}})
      md << "| " << label << " | " << mean_sd_cell(agg, std::string(key) + ".weighted_f1") << " | "
         << mean_sd_cell(agg, std::string(key) + ".accuracy") << " | "
         << mean_sd_cell(agg, std::string(key) + ".weighted_precision") << " |\n";
    md << "\n" << comparison_lines(*metrics, "weighted_f1");
  } else {
    md << missing("model metrics", "evaluate");
  }

  md << "\n## 2. Emotion model\n\n";
  if (metrics) {
    const auto& agg = metrics->at("aggregate");
    md << "Participant-level mean (SD).\n\n| Model | RMSE | R2 |\n|---|---|---|\n";
    for (auto [key, label] : {std::pair{"nn", "Neural network (MC dropout mean)"}, {"linear", "Linear regression"},
                              {"gaussian", "Random (Gaussian)"}})
      md << "| " << label << " | " << mean_sd_cell(agg, std::string(key) + ".rmse") << " | "
         << mean_sd_cell(agg, std::string(key) + ".r2") << " |\n";
    md << "\n" << comparison_lines(*metrics, "r2");
  } else {
    md << missing("model metrics", "evaluate");
  }

  md << "\n## 3. RQ1: J and receptivity\n\n";
  if (stats) {
    const auto& r = stats->at("rq1");
    md << "Mixed model: response ~ J + (1 | participant)\n\n";
    if (!r.at("lmm").is_null()) md << lmm_lines(r.at("lmm"));
    const auto& rm = r.at("repeated_measures");
    if (!rm.is_null()) {
      md << "\nRepeated-measures comparison of mean J for responses vs non-responses: F("
         << rm.at("df")[0].get<double>() << ", " << rm.at("df")[1].get<double>() << ") = " << fmt(rm.at("F").get<double>(), 2)
         << ", p = " << fmt_p(rm.at("p").get<double>()) << " (" << rm.at("participants").get<std::size_t>()
         << " participants, " << rm.at("excluded").size() << " excluded)\n";
    }
    md << notes_lines(r.at("notes"));
  } else {
    md << missing("RQ1 statistics", "evaluate");
  }

  md << "\n## 4. RQ2: J and emotional extremity\n\n";
  if (stats) {
    const auto& r = stats->at("rq2");
    md << "Mixed model: |z(PA)| ~ J + (1 | participant)\n\n";
    if (!r.at("lmm").is_null()) md << lmm_lines(r.at("lmm"));
    md << notes_lines(r.at("notes"));
    md << "\nMean J by |z(PA)| bin:\n\n| |z| bin | Count | Mean J |\n|---|---|---|\n";
    for (const auto& b : r.at("abs_z_curve")) {
      auto edge = [](const Json& e) { return e.is_string() ? std::string("inf") : fmt(e.get<double>(), 1); };
      md << "| [" << edge(b.at("bin_lo")) << ", " << edge(b.at("bin_hi")) << ") | " << b.at("count").get<std::size_t>()
         << " | " << (b.at("mean_j").is_null() ? std::string("n/a") : fmt(b.at("mean_j").get<double>())) << " |\n";
    }
    md << "\nThe J-vs-PA curve with the PA histogram is in `curve.csv`.\n";
  } else {
    md << missing("RQ2 statistics", "evaluate");
  }

  md << "\n## 5. RQ3: Smart vs Random triggering\n\n";
  const bool have_sim = sim && !sim->at("decisions").empty();
  const bool have_rq3 = stats && !stats->at("rq3").at("response_rate_t").is_null();
  if (have_sim && stats) {
    const auto& r = stats->at("rq3");
    auto ms = [](const Json& v) { return fmt(v.at("mean").get<double>()) + " (SD = " + fmt(v.at("sd").get<double>()) + ")"; };
    md << "Outcome source: " << sim->value("outcome_source", "unknown") << "; " << r.at("participants").get<std::size_t>()
       << " participants.\n\n";
    md << "| Policy | Response rate | Within-participant variance of predicted PA |\n|---|---|---|\n";
    md << "| Smart | " << ms(r.at("smart_rate")) << " | " << ms(r.at("smart_variance")) << " |\n";
    md << "| Random | " << ms(r.at("random_rate")) << " | " << ms(r.at("random_variance")) << " |\n\n";
    auto test = [&](const char* label, const char* stat, const Json& t) {
      if (t.is_null()) return;
      md << "- " << label << ": " << stat << " = " << fmt(t.at("statistic").get<double>(), 3)
         << ", p = " << fmt_p(t.at("p").get<double>()) << "\n";
    };
    test("Paired t-test on response rate (Smart - Random)", "t", r.at("response_rate_t"));
    test("Paired t-test on predicted-PA variance (Smart - Random)", "t", r.at("pa_variance_t"));
    test("KS test on predicted PA at Smart vs Random prompts", "D", r.at("ks_predicted_pa"));
    md << notes_lines(r.at("notes"));
    if (!have_rq3) md << "- note: response-rate test unavailable\n";
  } else {
    md << missing("trigger simulation results", have_sim ? "evaluate" : "simulate");
  }

  md << "\n## 6. J by response status\n\n";
  if (fs::exists(path(artifacts::kJByResponse))) {
    const CsvTable t = read_csv(path(artifacts::kJByResponse));
    std::vector<double> resp, miss;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      (t.rows[i][0] == "responded" ? resp : miss).push_back(parse_double(t.rows[i][1], t.where(i)));
    md << "| Status | n | Min | Q1 | Median | Q3 | Max |\n|---|---|---|---|---|---|---|\n";
    md << "| Responded " << box_summary(resp) << "\n| Missed " << box_summary(miss) << "\n";
    md << "\nPer-prompt values are in `j_by_response.csv`.\n";
  } else {
    md << missing("box-plot data", "evaluate");
  }
  return md.str();
}

StageOutcome run_stage(Stage stage, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  Context c{cfg, log, cfg.out_dir, config_hash(cfg), stage};
  Manifest manifest(cfg.out_dir);
  const HashMap inputs = stage_inputs(c);
  StageOutcome outcome;
  outcome.stage = stage;
  if (up_to_date(c, manifest.entry(stage), inputs)) {
    c.say("up to date");
    outcome.up_to_date = true;
    for (const auto& [name, h] : manifest.entry(stage)->at("outputs").get<HashMap>()) outcome.outputs.push_back(name);
    return outcome;
  }
  switch (stage) {
    case Stage::Generate: outcome.outputs = do_generate(c); break;
    case Stage::Label: outcome.outputs = do_label(c); break;
    case Stage::Features: outcome.outputs = do_features(c); break;
    case Stage::Train: outcome.outputs = do_train(c); break;
    case Stage::Simulate: outcome.outputs = do_simulate(c); break;
    case Stage::Evaluate: outcome.outputs = do_evaluate(c); break;
    case Stage::Report: outcome.outputs = do_report(c); break;
  }
  manifest.record(stage, c.hash, inputs, output_hashes(c, outcome.outputs));
  return outcome;
}

std::vector<StageOutcome> run_pipeline(const RunConfig& cfg, std::ostream& log) {
  std::vector<StageOutcome> out;
  const bool external = !cfg.cohort_dir.empty() && fs::exists(cfg.cohort_dir / "schema.json") &&
                        !fs::exists(cfg.cohort_dir / "cohort_spec.json");
  for (Stage s : pipeline_stages()) {
    if (s == Stage::Generate && external) {
      log << "[generate] skipped: using the cohort at " << cfg.cohort_dir.string() << "\n";
      continue;
    }
    out.push_back(run_stage(s, cfg, log));
  }
  return out;
}

}  // namespace emasched
