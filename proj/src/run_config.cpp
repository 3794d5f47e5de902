#include "emasched/run_config.hpp"

#include <algorithm>
#include <cmath>

#include "emasched/io.hpp"

namespace fs = std::filesystem;

namespace emasched {

namespace {

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view path) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : std::string(path), "expected an object");
  for (const auto& [k, v] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) throw ConfigError(join_path(path, k), "unknown field");
}

const Json* section(const Json& j, std::string_view key) {
  auto it = j.find(std::string(key));
  return it == j.end() ? nullptr : &*it;
}

Json model_json(const MlpSpec& spec) {
  Json j = spec_to_json(spec);
  j.erase("seed");
  return j;
}

MlpSpec model_from_json(const Json& overrides, const MlpSpec& base, std::string_view path) {
  if (!overrides.is_object()) throw ConfigError(std::string(path), "expected an object");
  if (overrides.contains("seed")) throw ConfigError(join_path(path, "seed"), "model seeds derive from the global seed");
  Json merged = model_json(base);
  merged.merge_patch(overrides);
  MlpSpec s = spec_from_json(merged, path);
  s.seed = base.seed;
  return s;
}

template <typename Enum, typename Parse>
void read_enum(const Json& obj, std::string_view key, Enum& out, std::string_view path, Parse parse) {
  std::string text;
  read_field(obj, key, text, path);
  if (text.empty()) return;
  try {
    out = parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(join_path(path, key), e.what());
  }
}

}  // namespace

fs::path RunConfig::cohort_path() const { return cohort_dir.empty() ? out_dir / "cohort" : cohort_dir; }

void RunConfig::validate() const {
  if (!is_allowed_width(experiment.features.segment_width_minutes))
    throw ConfigError("segment_width_minutes", "must be one of 10, 15, 20, 30, 60");
  cohort.validate();
  experiment.trigger.validate();
  if (experiment.mc_passes < 1) throw ConfigError("models.mc_passes", "must be >= 1");
  if (experiment.cv_groups < 2) throw ConfigError("cv.groups", "must be >= 2");
  const auto& edges = experiment.abs_z_edges;
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw ConfigError("report.abs_z_edges", "need at least two strictly increasing edges");
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.experiment.seed = seed;
  cfg.cohort.seed = seed;
  cfg.experiment.features.clusters.seed = seed;
  cfg.experiment.receptivity.seed = seed;
  cfg.experiment.emotion.seed = seed;
}

RunConfig default_run_config(std::uint64_t seed) {
  RunConfig cfg;
  apply_seed(cfg, seed);
  return cfg;
}

RunConfig run_config_from_json(const Json& j, std::optional<std::uint64_t> seed_override) {
  check_keys(j, {"schema_version", "seed", "paths", "segment_width_minutes", "cv", "models", "trigger", "labeling",
                 "features", "cohort", "report"},
             "");
  int version = 1;
  read_field(j, "schema_version", version, "");
  if (version != 1) throw ConfigError("schema_version", "unsupported version " + std::to_string(version));

  RunConfig cfg;
  std::uint64_t seed = 0;
  read_field(j, "seed", seed, "");
  if (!seed_override && !j.contains("seed")) throw ConfigError("seed", "required field missing");
  apply_seed(cfg, seed_override.value_or(seed));
  auto& ex = cfg.experiment;

  if (const Json* p = section(j, "paths")) {
    check_keys(*p, {"out", "cohort"}, "paths");
    std::string out, cohort;
    read_field(*p, "out", out, "paths");
    read_field(*p, "cohort", cohort, "paths");
    if (!out.empty()) cfg.out_dir = out;
    if (!cohort.empty()) cfg.cohort_dir = cohort;
  }

  int width = ex.features.segment_width_minutes;
  read_field(j, "segment_width_minutes", width, "");
  ex.features.segment_width_minutes = width;
  cfg.cohort.segment_width_minutes = width;
  ex.trigger.step_minutes = width;

  if (const Json* c = section(j, "cv")) {
    check_keys(*c, {"mode", "groups"}, "cv");
    read_enum(*c, "mode", ex.cv_mode, "cv", parse_cv_mode);
    read_field(*c, "groups", ex.cv_groups, "cv");
  }
  if (const Json* m = section(j, "models")) {
    check_keys(*m, {"receptivity", "emotion", "mc_passes"}, "models");
    if (const Json* r = section(*m, "receptivity")) ex.receptivity = model_from_json(*r, ex.receptivity, "models.receptivity");
    if (const Json* e = section(*m, "emotion")) ex.emotion = model_from_json(*e, ex.emotion, "models.emotion");
    read_field(*m, "mc_passes", ex.mc_passes, "models");
  }
  if (const Json* t = section(j, "trigger")) {
    check_keys(*t, {"w_u", "w_r", "windows", "window_minutes", "step_minutes", "day_start_minute", "uncertainty_norm",
                    "outcome_source"},
               "trigger");
    read_field(*t, "w_u", ex.trigger.w_u, "trigger");
    read_field(*t, "w_r", ex.trigger.w_r, "trigger");
    read_field(*t, "windows", ex.trigger.windows, "trigger");
    read_field(*t, "window_minutes", ex.trigger.window_minutes, "trigger");
    read_field(*t, "step_minutes", ex.trigger.step_minutes, "trigger");
    read_field(*t, "day_start_minute", ex.trigger.day_start_minute, "trigger");
    read_enum(*t, "uncertainty_norm", ex.trigger.norm, "trigger", parse_uncertainty_norm);
    read_enum(*t, "outcome_source", ex.outcome_source, "trigger", parse_outcome_source);
  }
  if (const Json* l = section(j, "labeling")) {
    check_keys(*l, {"non_response_minutes", "min_overlap_fraction"}, "labeling");
    read_field(*l, "non_response_minutes", ex.labeling.non_response_minutes, "labeling");
    read_field(*l, "min_overlap_fraction", ex.labeling.min_overlap_fraction, "labeling");
  }
  if (const Json* f = section(j, "features")) {
    check_keys(*f, {"hrv_sleep_only"}, "features");
    read_field(*f, "hrv_sleep_only", ex.features.hrv_sleep_only, "features");
  }
  if (const Json* c = section(j, "cohort")) {
    if (c->contains("seed")) throw ConfigError("cohort.seed", "the cohort seed is the global seed");
    if (c->contains("segment_width_minutes"))
      throw ConfigError("cohort.segment_width_minutes", "set the top-level segment_width_minutes instead");
    Json merged = cohort_spec_to_json(cfg.cohort);
    merged.merge_patch(*c);
    cfg.cohort = cohort_spec_from_json(merged, "cohort");
  }
  if (const Json* r = section(j, "report")) {
    check_keys(*r, {"title", "abs_z_edges"}, "report");
    read_field(*r, "title", cfg.report.title, "report");
    if (const Json* e = section(*r, "abs_z_edges")) {
      if (!e->is_array()) throw ConfigError("report.abs_z_edges", "expected an array");
      ex.abs_z_edges.clear();
      for (const auto& v : *e) {
        if (v.is_string() && v.get<std::string>() == "inf") {
          ex.abs_z_edges.push_back(std::numeric_limits<double>::infinity());
        } else if (v.is_number()) {
          ex.abs_z_edges.push_back(v.get<double>());
        } else {
          throw ConfigError("report.abs_z_edges", "entries must be numbers or \"inf\"");
        }
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  if (!fs::is_regular_file(path)) throw ConfigError(path.string(), "no such config file");
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string(), std::string("malformed JSON: ") + e.what());
  }
  return run_config_from_json(j, seed_override);
}

Json run_config_to_json(const RunConfig& cfg) {
  const auto& ex = cfg.experiment;
  Json edges = Json::array();
  for (double e : ex.abs_z_edges) edges.push_back(std::isfinite(e) ? Json(e) : Json("inf"));
  Json cohort = cohort_spec_to_json(cfg.cohort);
  cohort.erase("seed");
  cohort.erase("segment_width_minutes");
  return Json{{"schema_version", 1},
              {"seed", ex.seed},
              {"segment_width_minutes", ex.features.segment_width_minutes},
              {"cv", {{"mode", to_string(ex.cv_mode)}, {"groups", ex.cv_groups}}},
              {"models",
               {{"receptivity", model_json(ex.receptivity)},
                {"emotion", model_json(ex.emotion)},
                {"mc_passes", ex.mc_passes}}},
              {"trigger",
               {{"w_u", ex.trigger.w_u},
                {"w_r", ex.trigger.w_r},
                {"windows", ex.trigger.windows},
                {"window_minutes", ex.trigger.window_minutes},
                {"step_minutes", ex.trigger.step_minutes},
                {"day_start_minute", ex.trigger.day_start_minute},
                {"uncertainty_norm", to_string(ex.trigger.norm)},
                {"outcome_source", to_string(ex.outcome_source)}}},
              {"labeling",
               {{"non_response_minutes", ex.labeling.non_response_minutes},
                {"min_overlap_fraction", ex.labeling.min_overlap_fraction}}},
              {"features", {{"hrv_sleep_only", ex.features.hrv_sleep_only}}},
              {"cohort", cohort},
              {"report", {{"title", cfg.report.title}, {"abs_z_edges", edges}}}};
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(run_config_to_json(cfg).dump())); }

}  // namespace emasched
