#include "emasched/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "emasched/rng.hpp"

namespace emasched {

std::vector<LabeledSegment> label_table(const Cohort& cohort, const FeatureTable& table, const LabelingOptions& opts) {
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < table.rows(); ++r) rows_of[table.segments[r].participant_id].push_back(r);
  std::vector<LabeledSegment> out(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) out[r].segment = table.segments[r];
  for (const auto& p : cohort.participants) {
    auto it = rows_of.find(p.id);
    if (it == rows_of.end() || it->second.empty()) continue;
    std::vector<Segment> segs;
    for (auto r : it->second) segs.push_back(table.segments[r]);
    const auto labeled = label_receptivity(segs, p.events, segs.front().width_minutes, opts);
    for (std::size_t i = 0; i < labeled.size(); ++i) out[it->second[i]] = labeled[i];
  }
  return out;
}

Eigen::MatrixXd normalize_rows(const FeatureTable& table) {
  const auto nf = static_cast<Eigen::Index>(table.cols());
  struct Agg {
    Eigen::ArrayXd lo, hi, sum, n;
    explicit Agg(Eigen::Index f)
        : lo(Eigen::ArrayXd::Constant(f, std::numeric_limits<double>::infinity())),
          hi(Eigen::ArrayXd::Constant(f, -std::numeric_limits<double>::infinity())),
          sum(Eigen::ArrayXd::Zero(f)),
          n(Eigen::ArrayXd::Zero(f)) {}
    void add(const Agg& o) {
      lo = lo.min(o.lo);
      hi = hi.max(o.hi);
      sum += o.sum;
      n += o.n;
    }
  };
  // per participant, per study day
  std::map<std::string, std::map<int, Agg>> agg;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    auto& a = agg[s.participant_id].try_emplace(s.study_day, nf).first->second;
    for (Eigen::Index f = 0; f < nf; ++f) {
      const double v = table.values(static_cast<Eigen::Index>(r), f);
      if (std::isnan(v)) continue;
      a.lo(f) = std::min(a.lo(f), v);
      a.hi(f) = std::max(a.hi(f), v);
      a.sum(f) += v;
      a.n(f) += 1;
    }
  }
  std::map<std::string, Agg> totals;
  for (const auto& [pid, days] : agg) {
    Agg t(nf);
    for (const auto& [d, a] : days) t.add(a);
    totals.emplace(pid, std::move(t));
  }

  auto bounds_of = [&](const Agg& ref, const Agg& fallback) {
    FeatureBounds b;
    b.min.assign(static_cast<std::size_t>(nf), 0.0);
    b.max.assign(static_cast<std::size_t>(nf), 0.0);
    b.fill.assign(static_cast<std::size_t>(nf), 0.5);
    for (Eigen::Index f = 0; f < nf; ++f) {
      const Agg& src = ref.n(f) > 0 ? ref : fallback;
      if (src.n(f) == 0) continue;
      const auto k = static_cast<std::size_t>(f);
      b.min[k] = src.lo(f);
      b.max[k] = src.hi(f);
      const double mean = src.sum(f) / src.n(f);
      b.fill[k] = src.hi(f) > src.lo(f) ? (mean - src.lo(f)) / (src.hi(f) - src.lo(f)) : 0.5;
    }
    return b;
  };

  std::map<std::string, std::map<int, FeatureBounds>> bounds;
  for (const auto& [pid, days] : agg) {
    Agg others(nf);
    for (const auto& [q, t] : totals)
      if (q != pid) others.add(t);
    Agg prior(nf);
    for (const auto& [d, a] : days) {
      bounds[pid][d] = d <= 1 ? bounds_of(others, others) : bounds_of(prior, others);
      prior.add(a);
    }
  }

  Eigen::MatrixXd out(table.values.rows(), nf);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    const auto& b = bounds[s.participant_id][s.study_day];
    out.row(static_cast<Eigen::Index>(r)) = apply_bounds_row(table.values.row(static_cast<Eigen::Index>(r)), b);
  }
  return out;
}

namespace {

std::map<std::string, int> offsets_of(const Cohort& cohort) {
  std::map<std::string, int> out;
  for (const auto& p : cohort.participants) out[p.id] = p.utc_offset_minutes;
  return out;
}

// window index of a local minute-of-day, or -1 outside all windows / off-grid
int window_of(std::int64_t local_minute, const TriggerConfig& cfg) {
  const std::int64_t rel = local_minute - cfg.day_start_minute;
  if (rel < 0 || rel >= static_cast<std::int64_t>(cfg.windows) * cfg.window_minutes) return -1;
  if ((rel % cfg.window_minutes) % cfg.step_minutes != 0) return -1;
  return static_cast<int>(rel / cfg.window_minutes);
}

}  // namespace

bool is_candidate_time(Timestamp t, int utc_offset_minutes, const TriggerConfig& cfg) {
  return window_of(local_seconds_of_day(t, utc_offset_minutes) / 60, cfg) >= 0 &&
         local_seconds_of_day(t, utc_offset_minutes) % 60 == 0;
}

std::vector<std::size_t> candidate_rows(const Cohort& cohort, const FeatureTable& table, const TriggerConfig& cfg) {
  const auto offsets = offsets_of(cohort);
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    auto it = offsets.find(s.participant_id);
    const int off = it == offsets.end() ? 0 : it->second;
    if (s.empty()) continue;
    if (is_candidate_time(s.start, off, cfg)) out.push_back(r);
  }
  return out;
}

RowIndex::RowIndex(const Cohort& cohort, const FeatureTable& table) {
  const auto offsets = offsets_of(cohort);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& s = table.segments[r];
    auto it = offsets.find(s.participant_id);
    grid_[s.participant_id] = {it == offsets.end() ? 0 : it->second, s.width_minutes};
    rows_[s.participant_id][s.start.seconds] = r;
  }
}

std::optional<std::size_t> RowIndex::find(const std::string& participant, Timestamp t) const {
  auto g = grid_.find(participant);
  if (g == grid_.end()) return std::nullopt;
  const auto [off, width] = g->second;
  const Timestamp midnight = local_midnight(local_day_number(t, off), off);
  const std::int64_t w = std::int64_t{width} * 60;
  const std::int64_t start = midnight.seconds + ((t.seconds - midnight.seconds) / w) * w;
  const auto& rows = rows_.at(participant);
  auto it = rows.find(start);
  if (it == rows.end()) return std::nullopt;
  return it->second;
}

namespace {

struct RowPrediction {
  std::size_t row = 0;
  ModelOutput output;
  std::optional<double> nb_prob;
  std::optional<int> bernoulli_draw;
  std::optional<double> gaussian_draw;
  std::optional<double> ols_pred;
};

struct FoldResult {
  FoldReport report;
  std::optional<TrainedModel> receptivity;
  std::optional<TrainedModel> emotion;
  std::vector<RowPrediction> rows;
};

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return x;
}

FoldResult run_fold(std::size_t k, const CvFold& fold, const std::string& hash, const Eigen::MatrixXd& normalized,
                    const std::vector<LabeledSegment>& labels, const std::vector<bool>& predict_rows,
                    const ExperimentConfig& cfg) {
  FoldResult res;
  FoldReport& rep = res.report;
  rep.test_participants = fold.test_participants;
  std::vector<std::size_t> rec_rows, emo_rows;
  std::vector<int> y_rec;
  std::vector<double> y_emo;
  for (auto r : fold.train) {
    const auto& l = labels[r];
    if (l.receptivity == ReceptivityLabel::Unlabeled) continue;
    rec_rows.push_back(r);
    y_rec.push_back(l.receptivity == ReceptivityLabel::Receptive ? 1 : 0);
    if (l.receptivity == ReceptivityLabel::Receptive && l.pa_score) {
      emo_rows.push_back(r);
      y_emo.push_back(*l.pa_score);
    }
  }
  rep.train_labeled = rec_rows.size();
  rep.train_pa = emo_rows.size();
  const Eigen::MatrixXd x_rec = gather_rows(normalized, rec_rows), x_emo = gather_rows(normalized, emo_rows);
  const Eigen::VectorXd pa = Eigen::Map<const Eigen::VectorXd>(y_emo.data(), static_cast<Eigen::Index>(y_emo.size()));
  Baselines base;
  try {
    MlpSpec rs = cfg.receptivity;
    rs.seed = derive_seed(cfg.seed, {k, 1});
    MlpSpec es = cfg.emotion;
    es.seed = derive_seed(cfg.seed, {k, 2});
    res.receptivity = train_receptivity(x_rec, y_rec, rs, hash);
    res.emotion = train_emotion(x_emo, pa, es, hash);
    base = fit_baselines(x_rec, y_rec, x_emo, pa);
    rep.trained = true;
  } catch (const std::invalid_argument& e) {
    rep.note = e.what();
    res.receptivity.reset();
    res.emotion.reset();
    return res;
  }

  std::vector<std::size_t> targets;
  for (auto r : fold.test)
    if (predict_rows[r] || labels[r].receptivity != ReceptivityLabel::Unlabeled) targets.push_back(r);
  if (targets.empty()) return res;
  const Eigen::MatrixXd x_test = gather_rows(normalized, targets);
  const Eigen::VectorXd r_prob = predict_receptivity(*res.receptivity, x_test, hash);
  std::vector<std::uint64_t> seeds;
  for (auto r : targets) seeds.push_back(derive_seed(cfg.seed, {r, 7}));
  const auto mc = mc_dropout_predict(*res.emotion, x_test, cfg.mc_passes, seeds);
  const Eigen::VectorXd ols = base.linear.predict(x_test);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto r = targets[i];
    const auto ii = static_cast<Eigen::Index>(i);
    RowPrediction rp;
    rp.row = r;
    rp.output = ModelOutput{r_prob(ii), mc[i].mean, mc[i].var};
    const auto& l = labels[r];
    if (l.receptivity != ReceptivityLabel::Unlabeled) {
      Rng rng = make_rng(cfg.seed, {r, 11});
      rp.bernoulli_draw = base.receptivity.sample(rng);
      rp.nb_prob = base.naive_bayes.predict_proba(x_test.row(ii));
      if (l.receptivity == ReceptivityLabel::Receptive && l.pa_score) {
        rp.gaussian_draw = base.emotion.sample(rng);
        rp.ols_pred = ols(ii);
      }
    }
    res.rows.push_back(rp);
  }
  return res;
}

}  // namespace

CrossValidation cross_validate(const FeatureTable& table, const Eigen::MatrixXd& normalized,
                               const std::vector<LabeledSegment>& labels, const std::vector<bool>& predict_rows,
                               const ExperimentConfig& cfg) {
  const CvPlan plan = make_cv_plan(table, cfg.cv_mode, cfg.cv_groups);
  const std::string hash = table.registry_hash();
  std::vector<FoldResult> results(plan.folds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < plan.folds.size();) {
      try {
        results[k] = run_fold(k, plan.folds[k], hash, normalized, labels, predict_rows, cfg);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::clamp(cfg.jobs, 1, 64));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, plan.folds.size()); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  CrossValidation cv;
  const std::size_t n = table.rows();
  cv.outputs.assign(n, std::nullopt);
  cv.nb_prob.assign(n, std::nullopt);
  cv.bernoulli_draw.assign(n, std::nullopt);
  cv.gaussian_draw.assign(n, std::nullopt);
  cv.ols_pred.assign(n, std::nullopt);
  for (auto& fr : results) {
    for (const auto& rp : fr.rows) {
      cv.outputs[rp.row] = rp.output;
      cv.nb_prob[rp.row] = rp.nb_prob;
      cv.bernoulli_draw[rp.row] = rp.bernoulli_draw;
      cv.gaussian_draw[rp.row] = rp.gaussian_draw;
      cv.ols_pred[rp.row] = rp.ols_pred;
    }
    if (fr.receptivity) cv.receptivity_models.push_back(std::move(*fr.receptivity));
    if (fr.emotion) cv.emotion_models.push_back(std::move(*fr.emotion));
    cv.folds.push_back(std::move(fr.report));
  }
  return cv;
}

MetricsReport compute_metrics(const FeatureTable& table, const std::vector<LabeledSegment>& labels,
                              const CrossValidation& cv) {
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < table.rows(); ++r) rows_of[table.segments[r].participant_id].push_back(r);
  MetricsReport rep;
  std::map<std::string, std::vector<double>> series;
  auto push_cls = [&](const std::string& key, const std::optional<ClassificationMetrics>& m) {
    if (!m) return;
    series[key + ".accuracy"].push_back(m->accuracy);
    series[key + ".weighted_f1"].push_back(m->weighted_f1);
    series[key + ".weighted_precision"].push_back(m->weighted_precision);
  };
  auto push_reg = [&](const std::string& key, const std::optional<RegressionMetrics>& m) {
    if (!m) return;
    series[key + ".rmse"].push_back(m->rmse);
    if (m->r2) series[key + ".r2"].push_back(*m->r2);
  };
  for (const auto& [pid, rows] : rows_of) {
    ParticipantMetrics pm;
    pm.participant = pid;
    std::vector<int> yt, ynn, yrand, ynb;
    std::vector<double> pt, pnn, pgauss, pols;
    for (auto r : rows) {
      const auto& l = labels[r];
      if (l.receptivity == ReceptivityLabel::Unlabeled || !cv.outputs[r]) continue;
      yt.push_back(l.receptivity == ReceptivityLabel::Receptive ? 1 : 0);
      ynn.push_back(cv.outputs[r]->r_prob >= 0.5 ? 1 : 0);
      yrand.push_back(*cv.bernoulli_draw[r]);
      ynb.push_back(*cv.nb_prob[r] >= 0.5 ? 1 : 0);
      if (l.receptivity == ReceptivityLabel::Receptive && l.pa_score) {
        pt.push_back(*l.pa_score);
        pnn.push_back(cv.outputs[r]->emo_mean);
        pgauss.push_back(*cv.gaussian_draw[r]);
        pols.push_back(*cv.ols_pred[r]);
      }
    }
    const bool single_class =
        !yt.empty() && std::all_of(yt.begin(), yt.end(), [&](int v) { return v == yt.front(); });
    if (yt.empty()) {
      pm.note = "no predicted labeled segments";
    } else if (single_class) {
      pm.note = "single-class labels";
    } else {
      pm.nn = classification_metrics(yt, ynn);
      pm.random_baseline = classification_metrics(yt, yrand);
      pm.naive_bayes = classification_metrics(yt, ynb);
    }
    if (pt.size() >= 2) {
      pm.nn_regression = regression_metrics(pt, pnn);
      pm.gaussian_baseline = regression_metrics(pt, pgauss);
      pm.linear_baseline = regression_metrics(pt, pols);
    }
    push_cls("nn", pm.nn);
    push_cls("random", pm.random_baseline);
    push_cls("naive_bayes", pm.naive_bayes);
    push_reg("nn", pm.nn_regression);
    push_reg("gaussian", pm.gaussian_baseline);
    push_reg("linear", pm.linear_baseline);
    rep.participants.push_back(std::move(pm));
  }
  for (const auto& [k, v] : series) rep.aggregate[k] = mean_sd(v);

  auto compare = [&](const std::string& metric, const std::string& a, const std::string& b, auto get_a, auto get_b) {
    ModelComparison c;
    c.metric = metric;
    c.model_a = a;
    c.model_b = b;
    std::vector<double> va, vb;
    for (const auto& pm : rep.participants) {
      const auto x = get_a(pm), y = get_b(pm);
      if (x && y) {
        va.push_back(*x);
        vb.push_back(*y);
      }
    }
    c.participants = va.size();
    try {
      if (va.size() < 2) throw std::invalid_argument("fewer than two participants with both models");
      const TestResult t = paired_t_test(va, vb);
      c.f = t.statistic * t.statistic;
      c.p = t.p;
    } catch (const std::invalid_argument& e) {
      c.note = e.what();
    }
    rep.comparisons.push_back(std::move(c));
  };
  using Pm = ParticipantMetrics;
  using Opt = std::optional<double>;
  auto f1 = [](const std::optional<ClassificationMetrics>& m) { return m ? Opt(m->weighted_f1) : Opt(); };
  auto r2 = [](const std::optional<RegressionMetrics>& m) { return m ? m->r2 : Opt(); };
  compare("weighted_f1", "nn", "random", [&](const Pm& m) { return f1(m.nn); },
          [&](const Pm& m) { return f1(m.random_baseline); });
  compare("weighted_f1", "nn", "naive_bayes", [&](const Pm& m) { return f1(m.nn); },
          [&](const Pm& m) { return f1(m.naive_bayes); });
  compare("r2", "nn", "gaussian", [&](const Pm& m) { return r2(m.nn_regression); },
          [&](const Pm& m) { return r2(m.gaussian_baseline); });
  compare("r2", "nn", "linear", [&](const Pm& m) { return r2(m.nn_regression); },
          [&](const Pm& m) { return r2(m.linear_baseline); });
  return rep;
}

JTable compute_j_table(const Cohort& cohort, const FeatureTable& table, const std::vector<std::size_t>& candidates,
                       const CrossValidation& cv, const TriggerConfig& cfg) {
  const auto offsets = offsets_of(cohort);
  std::map<std::tuple<std::string, std::int64_t, int>, std::vector<std::size_t>> windows;
  for (auto r : candidates) {
    if (!cv.outputs[r]) continue;
    const auto& s = table.segments[r];
    auto it = offsets.find(s.participant_id);
    const int off = it == offsets.end() ? 0 : it->second;
    const int w = window_of(local_seconds_of_day(s.start, off) / 60, cfg);
    if (w < 0) continue;
    windows[{s.participant_id, local_day_number(s.start, off), w}].push_back(r);
  }
  JTable jt;
  for (const auto& [key, rows] : windows) {
    std::vector<double> var;
    for (auto r : rows) var.push_back(cv.outputs[r]->emo_var);
    const auto u = normalize_uncertainty(var, cfg.norm);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      jt.u[rows[i]] = u[i];
      jt.j[rows[i]] = objective_j(u[i], cv.outputs[rows[i]]->r_prob, cfg);
    }
  }
  return jt;
}

StatsReport compute_stats(const Cohort& cohort, const FeatureTable& table, const RowIndex& index, const JTable& jt,
                          const SimulationResult* sim, const ExperimentConfig& cfg) {
  (void)table;
  StatsReport rep;
  // RQ1: response ~ J; RQ2: |z(PA)| ~ J, both at the prompt's segment
  std::vector<double> y1, x1, y2, x2, pa2;
  std::vector<std::string> g1, g2;
  std::vector<ConditionObservation> obs;
  for (const auto& p : cohort.participants) {
    std::vector<double> pa_all;
    std::vector<std::string> grp;
    for (const auto& e : p.events)
      if (e.pa_score) {
        pa_all.push_back(*e.pa_score);
        grp.push_back(p.id);
      }
    const auto z = abs_z_transform(pa_all, grp);
    std::size_t k = 0;
    for (const auto& e : p.events) {
      const auto row = index.find(p.id, e.notification_time);
      const auto jit = row ? jt.j.find(*row) : jt.j.end();
      const bool has_j = row && jit != jt.j.end();
      if (has_j) {
        y1.push_back(e.responded() ? 1.0 : 0.0);
        x1.push_back(jit->second);
        g1.push_back(p.id);
        obs.push_back({p.id, e.responded(), jit->second});
        (e.responded() ? rep.box.responded : rep.box.missed).push_back(jit->second);
      }
      if (e.pa_score) {
        if (has_j && z[k]) {
          y2.push_back(*z[k]);
          x2.push_back(jit->second);
          pa2.push_back(*e.pa_score);
          g2.push_back(p.id);
        }
        ++k;
      }
    }
  }

  rep.rq1.observations = y1.size();
  try {
    rep.rq1.lmm = fit_random_intercept_lmm(y1, x1, g1);
  } catch (const std::exception& e) {
    rep.rq1.notes.push_back(std::string("mixed model: ") + e.what());
  }
  try {
    rep.rq1.anova = repeated_measures_f(obs);
    for (const auto& id : rep.rq1.anova->excluded)
      rep.rq1.notes.push_back("participant " + id + " excluded from repeated-measures analysis: one condition only");
  } catch (const std::exception& e) {
    rep.rq1.notes.push_back(std::string("repeated-measures F: ") + e.what());
  }

  rep.rq2.observations = y2.size();
  try {
    rep.rq2.lmm = fit_random_intercept_lmm(y2, x2, g2);
  } catch (const std::exception& e) {
    rep.rq2.notes.push_back(std::string("mixed model: ") + e.what());
  }
  if (!x2.empty()) {
    rep.rq2.pa_curve = j_vs_pa_curve(x2, pa2);
    rep.rq2.abs_z_curve = j_vs_abs_z_curve(x2, y2, cfg.abs_z_edges);
  }

  if (sim && !sim->participants.empty()) {
    std::vector<double> sr, rr, sv, rv, spa, rpa;
    for (const auto& p : sim->participants) {
      sr.push_back(p.smart.response_rate);
      rr.push_back(p.random.response_rate);
      sv.push_back(p.smart.predicted_pa_variance);
      rv.push_back(p.random.predicted_pa_variance);
    }
    for (const auto& d : sim->decisions)
      (d.decision.policy == Policy::Smart ? spa : rpa).push_back(d.output.emo_mean);
    auto& r3 = rep.rq3;
    r3.participants = sr.size();
    r3.smart_rate = mean_sd(sr);
    r3.random_rate = mean_sd(rr);
    r3.smart_variance = mean_sd(sv);
    r3.random_variance = mean_sd(rv);
    try {
      r3.response_rate_t = paired_t_test(sr, rr);
    } catch (const std::exception& e) {
      r3.notes.push_back(std::string("response-rate t-test: ") + e.what());
    }
    try {
      r3.pa_variance_t = paired_t_test(sv, rv);
    } catch (const std::exception& e) {
      r3.notes.push_back(std::string("variance t-test: ") + e.what());
    }
    if (!spa.empty() && !rpa.empty()) r3.ks_predicted_pa = ks_two_sample(spa, rpa);
  } else {
    rep.rq3.notes.push_back("no simulation results");
  }
  return rep;
}

std::vector<SegmentPrediction> segment_predictions(const FeatureTable& table, const std::vector<std::size_t>& candidates,
                                                   const CrossValidation& cv, const CohortTruth* truth) {
  std::vector<SegmentPrediction> out;
  for (auto r : candidates) {
    if (!cv.outputs[r]) continue;
    const auto& s = table.segments[r];
    SegmentPrediction sp;
    sp.participant = s.participant_id;
    sp.start = s.start;
    sp.study_day = s.study_day;
    sp.output = *cv.outputs[r];
    if (truth) {
      auto it = truth->participants.find(s.participant_id);
      if (it != truth->participants.end()) {
        if (const TruthPoint* tp = it->second.at(s.start)) {
          sp.truth_p_resp = tp->p_resp;
          sp.truth_pa = tp->latent_pa;
        }
      }
    }
    out.push_back(std::move(sp));
  }
  return out;
}

ExperimentResult run_experiment(const Cohort& cohort, const CohortTruth* truth, const ExperimentConfig& cfg) {
  if (cfg.outcome_source == OutcomeSource::GenerativeTruth && !truth)
    throw std::invalid_argument("generative-truth outcomes need the cohort's planted truth");
  ExperimentResult res;
  res.table = extract_features(cohort, cfg.features);
  res.labels = label_table(cohort, res.table, cfg.labeling);
  const Eigen::MatrixXd normalized = normalize_rows(res.table);
  const auto candidates = candidate_rows(cohort, res.table, cfg.trigger);
  std::vector<bool> predict(res.table.rows(), false);
  for (auto r : candidates) predict[r] = true;
  res.cv = cross_validate(res.table, normalized, res.labels, predict, cfg);
  res.metrics = compute_metrics(res.table, res.labels, res.cv);
  res.j = compute_j_table(cohort, res.table, candidates, res.cv, cfg.trigger);
  const auto preds = segment_predictions(res.table, candidates, res.cv, truth);
  res.simulation = simulate_triggers(preds, offsets_of(cohort), cfg.trigger, cfg.outcome_source, cfg.seed);
  const RowIndex index(cohort, res.table);
  res.stats = compute_stats(cohort, res.table, index, res.j, &res.simulation, cfg);
  return res;
}

namespace {

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json cls_json(const std::optional<ClassificationMetrics>& m) {
  if (!m) return nullptr;
  return Json{{"accuracy", m->accuracy}, {"weighted_f1", m->weighted_f1}, {"weighted_precision", m->weighted_precision}};
}

Json reg_json(const std::optional<RegressionMetrics>& m) {
  if (!m) return nullptr;
  return Json{{"rmse", m->rmse}, {"r2", opt_json(m->r2)}};
}

Json lmm_json(const std::optional<LmmFit>& f) {
  if (!f) return nullptr;
  return Json{{"beta0", f->beta0},       {"beta1", f->beta1},   {"se_beta1", f->se_beta1},
              {"z", f->z},               {"p", f->p},           {"ci95", {f->ci_low, f->ci_high}},
              {"sigma_u2", f->sigma_u2}, {"sigma_e2", f->sigma_e2}, {"observations", f->observations},
              {"groups", f->groups}};
}

Json test_json(const std::optional<TestResult>& t) {
  if (!t) return nullptr;
  return Json{{"statistic", t->statistic}, {"p", t->p}};
}

Json mean_sd_json(const MeanSd& m) { return Json{{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; }

Json curve_json(const std::vector<CurveRow>& rows) {
  Json a = Json::array();
  for (const auto& r : rows)
    a.push_back(Json{{"bin_lo", std::isfinite(r.bin_lo) ? Json(r.bin_lo) : Json("inf")},
                     {"bin_hi", std::isfinite(r.bin_hi) ? Json(r.bin_hi) : Json("inf")},
                     {"count", r.count},
                     {"mean_j", opt_json(r.mean_j)}});
  return a;
}

}  // namespace

Json metrics_to_json(const MetricsReport& m) {
  Json parts = Json::array();
  for (const auto& p : m.participants) {
    parts.push_back(Json{{"participant", p.participant},
                         {"nn", cls_json(p.nn)},
                         {"random", cls_json(p.random_baseline)},
                         {"naive_bayes", cls_json(p.naive_bayes)},
                         {"nn_regression", reg_json(p.nn_regression)},
                         {"gaussian", reg_json(p.gaussian_baseline)},
                         {"linear", reg_json(p.linear_baseline)},
                         {"note", p.note}});
  }
  Json agg = Json::object();
  for (const auto& [k, v] : m.aggregate) agg[k] = mean_sd_json(v);
  Json comps = Json::array();
  for (const auto& c : m.comparisons)
    comps.push_back(Json{{"metric", c.metric},
                         {"model_a", c.model_a},
                         {"model_b", c.model_b},
                         {"participants", c.participants},
                         {"F", opt_json(c.f)},
                         {"p", opt_json(c.p)},
                         {"note", c.note}});
  return Json{{"participants", parts}, {"aggregate", agg}, {"comparisons", comps}};
}

Json stats_to_json(const StatsReport& s) {
  Json rq1{{"observations", s.rq1.observations}, {"lmm", lmm_json(s.rq1.lmm)}, {"notes", s.rq1.notes}};
  if (s.rq1.anova) {
    rq1["repeated_measures"] = Json{{"F", s.rq1.anova->f},
                                    {"p", s.rq1.anova->p},
                                    {"df", {s.rq1.anova->df_effect, s.rq1.anova->df_error}},
                                    {"participants", s.rq1.anova->participants},
                                    {"excluded", s.rq1.anova->excluded}};
  } else {
    rq1["repeated_measures"] = nullptr;
  }
  Json rq2{{"observations", s.rq2.observations},
           {"lmm", lmm_json(s.rq2.lmm)},
           {"abs_z_curve", curve_json(s.rq2.abs_z_curve)},
           {"notes", s.rq2.notes}};
  Json rq3{{"participants", s.rq3.participants},
           {"response_rate_t", test_json(s.rq3.response_rate_t)},
           {"pa_variance_t", test_json(s.rq3.pa_variance_t)},
           {"ks_predicted_pa", test_json(s.rq3.ks_predicted_pa)},
           {"smart_rate", mean_sd_json(s.rq3.smart_rate)},
           {"random_rate", mean_sd_json(s.rq3.random_rate)},
           {"smart_variance", mean_sd_json(s.rq3.smart_variance)},
           {"random_variance", mean_sd_json(s.rq3.random_variance)},
           {"notes", s.rq3.notes}};
  return Json{{"rq1", rq1}, {"rq2", rq2}, {"rq3", rq3}};
}

}  // namespace emasched
