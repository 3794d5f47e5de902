#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "emasched/stages.hpp"

using namespace emasched;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string cohort;
  std::optional<int> jobs;
  std::optional<double> w_u;
  std::optional<double> w_r;
  std::optional<int> windows;
  std::string outcome_source;
};

RunConfig resolve_config(const Overrides& o) {
  std::string path = o.config;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  RunConfig cfg = path.empty() ? default_run_config(o.seed.value_or(1)) : load_run_config(path, o.seed);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.cohort.empty()) cfg.cohort_dir = o.cohort;
  auto& ex = cfg.experiment;
  if (o.jobs) ex.jobs = *o.jobs;
  if (o.w_u) ex.trigger.w_u = *o.w_u;
  if (o.w_r) ex.trigger.w_r = *o.w_r;
  if (o.windows) ex.trigger.windows = *o.windows;
  if (!o.outcome_source.empty()) {
    try {
      ex.outcome_source = parse_outcome_source(o.outcome_source);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("--outcome-source", e.what());
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware EMA scheduling: cohort synthesis, model training, trigger simulation, statistics"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration (default: $EMASCHED_CONFIG, else built-in demo)");
  app.add_option("--seed", o.seed, "Global seed; overrides the config");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--cohort", o.cohort, "Cohort directory (default: <out>/cohort)");
  app.add_option("--jobs", o.jobs, "Worker threads for cross-validation folds")->check(CLI::PositiveNumber);
  app.add_option("--wu", o.w_u, "Uncertainty weight w_u")->check(CLI::NonNegativeNumber);
  app.add_option("--wr", o.w_r, "Receptivity weight w_r")->check(CLI::NonNegativeNumber);
  app.add_option("--windows", o.windows, "Prompting windows per day")->check(CLI::PositiveNumber);
  app.add_option("--outcome-source", o.outcome_source,
                 "Response outcome source: model_bernoulli, model_threshold or generative_truth");

  std::optional<Stage> chosen;
  bool pipeline = false;
  const std::pair<Stage, const char*> stages[] = {
      {Stage::Generate, "Synthesize a cohort with planted structure"},
      {Stage::Label, "Label segments as receptive / non-receptive"},
      {Stage::Features, "Extract per-segment features"},
      {Stage::Train, "Cross-validate the receptivity and emotion models"},
      {Stage::Simulate, "Simulate smart vs random triggering"},
      {Stage::Evaluate, "Compute model metrics and RQ1-RQ3 statistics"},
      {Stage::Report, "Render the markdown report"},
  };
  for (const auto& [stage, help] : stages) {
    const Stage s = stage;
    app.add_subcommand(to_string(s), help)->callback([&chosen, s] { chosen = s; });
  }
  app.add_subcommand("pipeline", "Run every stage in order")->callback([&pipeline] { pipeline = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve_config(o);
    if (pipeline) {
      run_pipeline(cfg, std::cerr);
    } else {
      run_stage(*chosen, cfg, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
