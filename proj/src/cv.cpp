#include "oep/cv.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace oep::cv {

const char* policy_name(DatasetPolicy p) { return p == DatasetPolicy::LabOnly ? "lab_only" : "home_with_lab_train"; }

DatasetPolicy parse_dataset_policy(const std::string& s) {
  if (s == "lab_only") return DatasetPolicy::LabOnly;
  if (s == "home_with_lab_train") return DatasetPolicy::HomeWithLabTrain;
  fail(ErrorCategory::Config, "unknown dataset policy '" + s + "' (expected lab_only or home_with_lab_train)");
}

CvPlan build_plan(const std::vector<SubjectRef>& subjects, DatasetPolicy policy) {
  std::vector<std::string> tuned, extra;
  std::set<std::string> seen;
  for (const auto& s : subjects) {
    if (!seen.insert(s.id).second) fail(ErrorCategory::Parameter, "duplicate subject id '" + s.id + "'");
    if (policy == DatasetPolicy::LabOnly) {
      if (s.dataset == DatasetId::Lab) tuned.push_back(s.id);
    } else {
      (s.dataset == DatasetId::Home ? tuned : extra).push_back(s.id);
    }
  }
  if (tuned.size() < 3)
    fail(ErrorCategory::Parameter, "nested leave-one-subject-out needs at least 3 subjects in the tuned dataset, got " +
                                       std::to_string(tuned.size()));
  CvPlan plan;
  plan.policy = policy;
  for (const auto& test : tuned) {
    OuterFold f;
    f.test = test;
    for (const auto& s : tuned)
      if (s != test) f.training.push_back(s);
    for (const auto& val : f.training) {
      InnerFold in;
      in.validation = val;
      for (const auto& s : f.training)
        if (s != val) in.training.push_back(s);
      in.training.insert(in.training.end(), extra.begin(), extra.end());
      f.inner.push_back(std::move(in));
    }
    f.training.insert(f.training.end(), extra.begin(), extra.end());
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

struct Stacked {
  models::Matrix X;
  std::vector<int> y;
};

Stacked stack(const std::map<std::string, const SubjectData*>& data, const std::vector<std::string>& ids,
              std::size_t cols) {
  Stacked s;
  s.X = models::Matrix(0, cols);
  for (const auto& id : ids) {
    const auto it = data.find(id);
    if (it == data.end()) fail(ErrorCategory::Data, "no data for subject '" + id + "'");
    const auto& d = *it->second;
    for (std::size_t r = 0; r < d.X.rows(); ++r) s.X.append_row(d.X.row(r));
    s.y.insert(s.y.end(), d.y.begin(), d.y.end());
  }
  return s;
}

std::size_t column_count(const std::map<std::string, const SubjectData*>& data) {
  for (const auto& [id, d] : data)
    if (d->X.cols() > 0) return d->X.cols();
  return 0;
}

double score(std::span<const int> truth, std::span<const int> pred) {
  return eval::weighted_f1(eval::window_scores(truth, pred));
}

bool trainable(models::ModelKind kind, const Stacked& train) {
  if (train.y.empty()) return false;
  return kind != models::ModelKind::SvmRbf || models::class_set(train.y).size() >= 2;
}

// Validation f1 of every candidate for each validation subject; an entry is
// empty when that fold is unusable.
std::vector<std::vector<double>> inner_scores(models::ModelKind kind, const std::vector<models::Hyperparams>& grid,
                                              const Stacked& train, const std::vector<const SubjectData*>& vals,
                                              std::uint64_t seed) {
  std::vector<std::vector<double>> out(vals.size());
  if (!trainable(kind, train)) return out;
  std::vector<std::size_t> usable;
  for (std::size_t v = 0; v < vals.size(); ++v)
    if (!vals[v]->y.empty()) {
      usable.push_back(v);
      out[v].assign(grid.size(), 0.0);
    }
  if (usable.empty()) return out;
  if (kind != models::ModelKind::RandomForest) {
    for (std::size_t c = 0; c < grid.size(); ++c) {
      try {
        const auto m = models::fit_model(kind, grid[c], train.X, train.y, seed);
        for (auto v : usable) out[v][c] = score(vals[v]->y, models::predict_rows(m, vals[v]->X));
      } catch (const Error& e) {
        // k larger than the training set, or SMO hitting its cap: the
        // candidate simply scores zero on this fold.
        if (e.category() != ErrorCategory::Parameter && e.category() != ErrorCategory::Training) throw;
      }
    }
    return out;
  }
  // One forest with the largest settings covers the whole grid.
  int max_trees = 0, max_depth = 0;
  for (const auto& h : grid) {
    max_trees = std::max(max_trees, h.n_trees);
    max_depth = std::max(max_depth, h.max_depth);
  }
  models::Hyperparams big;
  big.n_trees = max_trees;
  big.max_depth = max_depth;
  const auto m = models::fit_model(kind, big, train.X, train.y, seed);
  const auto& forest = std::get<models::ForestParams>(m.params);
  const std::size_t nc = forest.classes.size();
  const auto D = static_cast<std::size_t>(max_depth);

  std::set<int> checkpoints;
  for (const auto& h : grid) checkpoints.insert(h.n_trees);
  std::vector<int> votes(D * nc);
  std::vector<int> path(D);
  for (auto v : usable) {
    const auto& val = *vals[v];
    // pred[(trees checkpoint, depth)] per validation row
    std::map<std::pair<int, int>, std::vector<int>> preds;
    std::vector<double> x(val.X.cols());
    for (std::size_t r = 0; r < val.X.rows(); ++r) {
      const auto raw = val.X.row(r);
      std::copy(raw.begin(), raw.end(), x.begin());
      features::apply_norm_inplace(m.norm, x);
      std::fill(votes.begin(), votes.end(), 0);
      for (int t = 0; t < max_trees; ++t) {
        models::rf_path_classes(forest.trees[static_cast<std::size_t>(t)], x, max_depth, path);
        for (std::size_t d = 0; d < D; ++d) ++votes[d * nc + static_cast<std::size_t>(path[d])];
        if (!checkpoints.count(t + 1)) continue;
        for (std::size_t d = 0; d < D; ++d) {
          const auto* vv = &votes[d * nc];
          const auto best = static_cast<std::size_t>(std::max_element(vv, vv + nc) - vv);
          preds[{t + 1, static_cast<int>(d + 1)}].push_back(forest.classes[best]);
        }
      }
    }
    for (std::size_t c = 0; c < grid.size(); ++c)
      out[v][c] = score(val.y, preds.at({grid[c].n_trees, grid[c].max_depth}));
  }
  return out;
}

// Inner scores keyed by (training list, validation subject). Two outer folds
// whose test and validation subjects swap train on the same list, so one fit
// scores both.
class InnerScoreCache {
 public:
  using Key = std::pair<std::vector<std::string>, std::string>;

  std::optional<std::vector<double>> find(const Key& k) {
    std::lock_guard lock(mu_);
    const auto it = scores_.find(k);
    if (it == scores_.end()) return std::nullopt;
    return it->second;
  }
  void put(Key k, std::vector<double> v) {
    std::lock_guard lock(mu_);
    scores_.emplace(std::move(k), std::move(v));
  }

 private:
  std::mutex mu_;
  std::map<Key, std::vector<double>> scores_;
};

Selection select_with_cache(models::ModelKind kind, const std::map<std::string, const SubjectData*>& data,
                            const std::vector<InnerFold>& inner, std::uint64_t seed, int jobs,
                            InnerScoreCache* cache) {
  const auto grid = models::grid_candidates(kind);
  const std::size_t cols = column_count(data);
  std::vector<std::vector<double>> per_fold(inner.size());
  parallel_for(inner.size(), jobs, [&](std::size_t f) {
    const auto it = data.find(inner[f].validation);
    if (it == data.end()) fail(ErrorCategory::Data, "no data for subject '" + inner[f].validation + "'");
    if (cache) {
      if (auto hit = cache->find({inner[f].training, inner[f].validation})) {
        per_fold[f] = std::move(*hit);
        return;
      }
    }
    const auto train = stack(data, inner[f].training, cols);
    // With a cache, every subject left out of training is scored at once.
    std::vector<const SubjectData*> vals{it->second};
    if (cache) {
      const std::set<std::string> in_train(inner[f].training.begin(), inner[f].training.end());
      for (const auto& [id, d] : data)
        if (id != inner[f].validation && !in_train.count(id)) vals.push_back(d);
    }
    auto scores = inner_scores(kind, grid, train, vals, seed);
    per_fold[f] = scores[0];
    if (cache)
      for (std::size_t v = 0; v < vals.size(); ++v) cache->put({inner[f].training, vals[v]->id}, std::move(scores[v]));
  });
  Selection s;
  s.candidate_mean_f1.assign(grid.size(), 0.0);
  for (const auto& f : per_fold) {
    if (f.empty()) continue;
    ++s.inner_folds_used;
    for (std::size_t c = 0; c < grid.size(); ++c) s.candidate_mean_f1[c] += f[c];
  }
  if (s.inner_folds_used > 0)
    for (double& v : s.candidate_mean_f1) v /= s.inner_folds_used;
  const auto best = std::max_element(s.candidate_mean_f1.begin(), s.candidate_mean_f1.end());  // first maximum
  s.chosen = grid[static_cast<std::size_t>(best - s.candidate_mean_f1.begin())];
  s.mean_f1 = *best;
  return s;
}

}  // namespace

Selection select_hyperparams(models::ModelKind kind, const std::map<std::string, const SubjectData*>& data,
                             const std::vector<InnerFold>& inner, std::uint64_t seed, int jobs) {
  return select_with_cache(kind, data, inner, seed, jobs, nullptr);
}

namespace {

std::string missing_classes_warning(const std::vector<int>& train_y, const std::vector<int>& test_y) {
  const auto have = models::class_set(train_y);
  std::string missing;
  for (int c : models::class_set(test_y))
    if (!std::binary_search(have.begin(), have.end(), c)) missing += (missing.empty() ? "" : ",") + std::to_string(c);
  return missing.empty() ? "" : "test labels absent from training: " + missing;
}

}  // namespace

std::vector<FoldResult> tune_and_test(const CvPlan& plan, models::ModelKind kind,
                                      const std::vector<SubjectData>& subjects, std::uint64_t seed, int jobs) {
  std::map<std::string, const SubjectData*> data;
  for (const auto& s : subjects) data[s.id] = &s;
  const std::size_t cols = column_count(data);
  std::vector<FoldResult> out(plan.folds.size());
  InnerScoreCache cache;
  parallel_for(plan.folds.size(), jobs, [&](std::size_t i) {
    const auto& fold = plan.folds[i];
    auto& r = out[i];
    r.test_subject = fold.test;
    const auto train = stack(data, fold.training, cols);
    if (!trainable(kind, train)) {
      r.skipped = true;
      r.warning = "fold '" + fold.test + "' skipped: training set has " +
                  (train.y.empty() ? "no windows" : "a single class");
      return;
    }
    r.selection = select_with_cache(kind, data, fold.inner, seed, 1, &cache);
    const auto model = models::fit_model(kind, r.selection.chosen, train.X, train.y, seed);
    const auto& test = *data.at(fold.test);
    r.truth = test.y;
    r.pred = models::predict_rows(model, test.X);
    r.warning = missing_classes_warning(train.y, test.y);
    if (!r.truth.empty()) r.test_weighted_f1 = score(r.truth, r.pred);
  });
  return out;
}

eval::EvalReport pool_reports(const std::vector<std::vector<int>>& truths, const std::vector<std::vector<int>>& preds,
                              const std::vector<const eval::EvalReport*>& reports, LabelSpace space,
                              eval::TransitionPolicy policy) {
  std::vector<int> t, p;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    t.insert(t.end(), truths[i].begin(), truths[i].end());
    p.insert(p.end(), preds[i].begin(), preds[i].end());
  }
  const int transition = space == LabelSpace::Activity ? ActivityLabel::kTransitionCode
                         : space == LabelSpace::Level1 ? static_cast<int>(Level1::Transition)
                                                       : kUnassigned;
  eval::EvalReport r;
  r.space = space;
  r.policy = policy;
  const auto pairs = eval::apply_transition_policy(t, p, policy, transition);
  r.n_windows = static_cast<int>(pairs.truth.size());
  r.window = eval::window_scores(pairs.truth, pairs.pred);
  r.weighted_f1 = 0;
  {
    double num = 0, den = 0;
    for (const auto& s : r.window) {
      if (s.label == transition && transition != kUnassigned) continue;
      num += s.f1 * s.support();
      den += s.support();
    }
    if (den > 0) r.weighted_f1 = num / den;
  }
  if (reports.empty()) return r;
  for (std::size_t k = 0; k < reports.front()->segmental.size(); ++k) {
    eval::SegmentalAtThreshold agg;
    agg.threshold = reports.front()->segmental[k].threshold;
    std::map<int, eval::SegmentScore> by_label;
    for (const auto* rep : reports) {
      for (const auto& s : rep->segmental.at(k).classes) {
        auto& a = by_label[s.label];
        a.label = s.label;
        a.n_pred += s.n_pred;
        a.n_true += s.n_true;
        a.tp += s.tp;
        a.fp += s.fp;
        a.fn += s.fn;
        a.fp_matched += s.fp_matched;
        a.fn_matched += s.fn_matched;
      }
    }
    for (auto& [label, a] : by_label) {
      const auto sc = eval::score_from_counts(label, {a.tp, a.fp, a.fn});
      a.precision = sc.precision;
      a.recall = sc.recall;
      a.f1 = sc.f1;
      agg.classes.push_back(a);
    }
    r.segmental.push_back(std::move(agg));
  }
  return r;
}

namespace {

constexpr hierarchy::ModelRole kRoles[] = {hierarchy::ModelRole::Stage1, hierarchy::ModelRole::Level1,
                                           hierarchy::ModelRole::Walking, hierarchy::ModelRole::Standing};

std::vector<int> window_truth(const hierarchy::StageWindows& w) {
  std::vector<int> out;
  out.reserve(w.size());
  for (const auto& t : w.truth) out.push_back(t.label);
  return out;
}

}  // namespace

PipelineCvResult pipeline_cv(const std::vector<hierarchy::SessionWindows>& sessions, const PipelineCvConfig& config) {
  config.cascade.validate();
  std::vector<SubjectRef> refs;
  std::map<std::string, const hierarchy::SessionWindows*> by_id;
  for (const auto& s : sessions) {
    refs.push_back({s.subject_id, s.subject.dataset_id});
    by_id[s.subject_id] = &s;
  }
  const auto plan = build_plan(refs, config.policy);

  // Role rows per subject, built once and shared by every fold.
  std::map<hierarchy::ModelRole, std::vector<SubjectData>> rows;
  for (auto role : kRoles) {
    auto& v = rows[role];
    for (const auto& s : sessions) {
      auto rr = hierarchy::role_rows(s, role);
      v.push_back({s.subject_id, std::move(rr.X), std::move(rr.y)});
    }
  }
  std::map<hierarchy::ModelRole, std::map<std::string, const SubjectData*>> data;
  for (auto& [role, v] : rows)
    for (const auto& d : v) data[role][d.id] = &d;

  PipelineCvResult result;
  result.folds.resize(plan.folds.size());
  std::map<hierarchy::ModelRole, InnerScoreCache> caches;
  for (auto role : kRoles) caches[role];
  parallel_for(plan.folds.size(), config.jobs, [&](std::size_t i) {
    const auto& fold = plan.folds[i];
    auto& r = result.folds[i];
    r.test_subject = fold.test;
    hierarchy::ModelBundle bundle;
    bundle.config = config.cascade;
    for (auto role : kRoles) {
      RoleSelection rs;
      rs.role = role;
      if (config.stage1_only && role != hierarchy::ModelRole::Stage1) {
        r.roles.push_back(rs);
        continue;
      }
      const auto& d = data.at(role);
      const auto train = stack(d, fold.training, column_count(d));
      if (!trainable(config.kind, train) ||
          (role == hierarchy::ModelRole::Stage1 && models::class_set(train.y).size() < 2)) {
        r.warnings.push_back(std::string(hierarchy::role_name(role)) + " model not trained: training set has " +
                             (train.y.empty() ? "no windows" : "a single class"));
        r.roles.push_back(rs);
        continue;
      }
      rs.selection = select_with_cache(config.kind, d, fold.inner, config.seed, 1, &caches.at(role));
      auto model = models::fit_model(config.kind, rs.selection.chosen, train.X, train.y, config.seed);
      model.provenance = "nested LOSO, inner mean weighted f1 " + std::to_string(rs.selection.mean_f1);
      rs.trained = true;
      switch (role) {
        case hierarchy::ModelRole::Stage1: bundle.stage1 = std::move(model), bundle.has_stage1 = true; break;
        case hierarchy::ModelRole::Level1: bundle.level1 = std::move(model), bundle.has_level1 = true; break;
        case hierarchy::ModelRole::Walking: bundle.walking = std::move(model), bundle.has_walking = true; break;
        case hierarchy::ModelRole::Standing: bundle.standing = std::move(model), bundle.has_standing = true; break;
      }
      r.roles.push_back(rs);
    }
    if (!bundle.has_stage1) {
      r.warnings.push_back("fold skipped: no stage-1 model");
      return;
    }
    const auto& w = *by_id.at(fold.test);
    const auto s1 = hierarchy::stage1_classify(w, bundle.stage1, config.cascade);
    r.stage1_truth = window_truth(w.stage1);
    r.stage1_pred = s1.smoothed;
    r.stage1_raw = s1.raw;
    r.stage1 = eval::evaluate(r.stage1_truth, r.stage1_pred, hierarchy::truth_timeline(w, LabelSpace::Stage1),
                              s1.timeline, config.thresholds, config.transitions);

    if (config.stage1_only || !bundle.has_level1 || !bundle.has_walking || !bundle.has_standing) {
      r.stage2_skipped = true;
      return;
    }
    if (!s1.oep) r.warnings.push_back("no exercise session detected; every stage-2 window is daily life");
    const auto s2 = hierarchy::stage2_classify(w, s1.oep, bundle, config.cascade);
    // Stage 2 is scored on exercise and transition windows; daily-life truth
    // belongs to stage 1.
    auto truth2 = window_truth(w.stage2);
    for (int& l : truth2)
      if (l == ActivityLabel::kAdlCode) l = kUnassigned;
    auto truth_tl = hierarchy::truth_timeline(w, LabelSpace::Activity);
    for (int& l : truth_tl.labels)
      if (l == ActivityLabel::kAdlCode) l = kUnassigned;
    r.stage2_truth = truth2;
    r.stage2_pred = s2.level2;
    r.stage2 = eval::evaluate(r.stage2_truth, r.stage2_pred, truth_tl, s2.timeline, config.thresholds,
                              config.transitions);
  });

  std::vector<std::vector<int>> t1, p1, t2, p2;
  std::vector<const eval::EvalReport*> r1, r2;
  for (const auto& f : result.folds) {
    if (f.stage1_truth.empty() && f.stage1_pred.empty()) continue;
    t1.push_back(f.stage1_truth);
    p1.push_back(f.stage1_pred);
    r1.push_back(&f.stage1);
    if (f.stage2_skipped) continue;
    t2.push_back(f.stage2_truth);
    p2.push_back(f.stage2_pred);
    r2.push_back(&f.stage2);
  }
  result.stage1 = pool_reports(t1, p1, r1, LabelSpace::Stage1, config.transitions);
  result.stage2 = pool_reports(t2, p2, r2, LabelSpace::Activity, config.transitions);
  for (const auto& s : result.stage1.window)
    if (s.label == kStage1Oep) result.stage1_oep_f1 = s.f1;
  return result;
}

TrainedBundle train_bundle(const std::vector<hierarchy::SessionWindows>& sessions,
                           const hierarchy::CascadeConfig& cascade, models::ModelKind kind, std::uint64_t seed,
                           int jobs) {
  cascade.validate();
  std::vector<std::string> ids;
  for (const auto& s : sessions) {
    if (std::find(ids.begin(), ids.end(), s.subject_id) != ids.end())
      fail(ErrorCategory::Parameter, "duplicate subject id '" + s.subject_id + "'");
    ids.push_back(s.subject_id);
  }
  if (ids.empty()) fail(ErrorCategory::Parameter, "no sessions to train on");
  std::vector<InnerFold> inner;
  if (ids.size() >= 2)
    for (const auto& val : ids) {
      InnerFold f;
      f.validation = val;
      for (const auto& s : ids)
        if (s != val) f.training.push_back(s);
      inner.push_back(std::move(f));
    }

  TrainedBundle out;
  out.bundle.config = cascade;
  for (auto role : kRoles) {
    std::vector<SubjectData> rows;
    for (const auto& s : sessions) {
      auto rr = hierarchy::role_rows(s, role);
      rows.push_back({s.subject_id, std::move(rr.X), std::move(rr.y)});
    }
    std::map<std::string, const SubjectData*> data;
    for (const auto& d : rows) data[d.id] = &d;
    const auto train = stack(data, ids, column_count(data));
    if (!trainable(kind, train) || (role == hierarchy::ModelRole::Stage1 && models::class_set(train.y).size() < 2))
      fail(ErrorCategory::Training, std::string(hierarchy::role_name(role)) + " model cannot be trained: " +
                                        (train.y.empty() ? "no pure windows" : "a single class"));
    RoleSelection rs;
    rs.role = role;
    std::string provenance;
    if (inner.empty()) {
      rs.selection.chosen = models::grid_candidates(kind).front();
      provenance = "single subject, first grid candidate";
    } else {
      rs.selection = select_hyperparams(kind, data, inner, seed, jobs);
      provenance = "LOSO, mean weighted f1 " + std::to_string(rs.selection.mean_f1);
    }
    auto model = models::fit_model(kind, rs.selection.chosen, train.X, train.y, seed);
    model.provenance = provenance;
    rs.trained = true;
    auto& b = out.bundle;
    switch (role) {
      case hierarchy::ModelRole::Stage1: b.stage1 = std::move(model), b.has_stage1 = true; break;
      case hierarchy::ModelRole::Level1: b.level1 = std::move(model), b.has_level1 = true; break;
      case hierarchy::ModelRole::Walking: b.walking = std::move(model), b.has_walking = true; break;
      case hierarchy::ModelRole::Standing: b.standing = std::move(model), b.has_standing = true; break;
    }
    out.roles.push_back(std::move(rs));
  }
  return out;
}

}  // namespace oep::cv
