#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "oep/cv.hpp"
#include "oep/synthgen.hpp"

using namespace oep;
using namespace oep::cv;
using testutil::category_of;
using oracle::noisy_subjects;
using oracle::roster;

namespace {

// Grid scores recomputed by fitting every candidate separately.
std::vector<double> oracle_scores(models::ModelKind kind, const std::vector<SubjectData>& subjects,
                                  const std::vector<InnerFold>& inner, std::uint64_t seed) {
  const auto grid = models::grid_candidates(kind);
  std::vector<double> mean(grid.size(), 0.0);
  for (const auto& f : inner) {
    models::Matrix X(0, subjects.front().X.cols());
    std::vector<int> y;
    for (const auto& id : f.training)
      for (const auto& s : subjects)
        if (s.id == id) {
          for (std::size_t r = 0; r < s.X.rows(); ++r) X.append_row(s.X.row(r));
          y.insert(y.end(), s.y.begin(), s.y.end());
        }
    const SubjectData* val = nullptr;
    for (const auto& s : subjects)
      if (s.id == f.validation) val = &s;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const auto m = models::fit_model(kind, grid[c], X, y, seed);
      mean[c] += eval::weighted_f1(eval::window_scores(val->y, models::predict_rows(m, val->X))) / inner.size();
    }
  }
  return mean;
}

std::map<std::string, const SubjectData*> index(const std::vector<SubjectData>& v) {
  std::map<std::string, const SubjectData*> m;
  for (const auto& s : v) m[s.id] = &s;
  return m;
}

}  // namespace

TEST_SUITE("cv") {

TEST_CASE("plan shapes") {
  auto p = build_plan(roster(11, 0), DatasetPolicy::LabOnly);
  CHECK(p.folds.size() == 11);
  for (const auto& f : p.folds) {
    CHECK(f.inner.size() == 10);
    CHECK(std::find(f.training.begin(), f.training.end(), f.test) == f.training.end());
    for (const auto& in : f.inner) {
      CHECK(in.validation != f.test);
      CHECK(std::find(in.training.begin(), in.training.end(), f.test) == in.training.end());
      CHECK(std::find(in.training.begin(), in.training.end(), in.validation) == in.training.end());
    }
  }

  p = build_plan(roster(11, 7), DatasetPolicy::HomeWithLabTrain);
  CHECK(p.folds.size() == 7);
  for (const auto& f : p.folds) {
    CHECK(f.test[0] == 'H');
    CHECK(f.inner.size() == 6);
    auto has_all_lab = [](const std::vector<std::string>& ids) {
      int lab = 0;
      for (const auto& id : ids) lab += id[0] == 'L';
      return lab == 11;
    };
    CHECK(has_all_lab(f.training));
    for (const auto& in : f.inner) {
      CHECK(has_all_lab(in.training));
      CHECK(in.validation[0] == 'H');
    }
  }

  p = build_plan(roster(3, 0), DatasetPolicy::LabOnly);
  CHECK(p.folds.size() == 3);
  CHECK(p.folds[0].inner.size() == 2);
  CHECK(category_of([] { build_plan(roster(2, 5), DatasetPolicy::LabOnly); }) == ErrorCategory::Parameter);
  CHECK(category_of([] { build_plan(roster(5, 2), DatasetPolicy::HomeWithLabTrain); }) == ErrorCategory::Parameter);
}

TEST_CASE("parallel_for writes every slot and rethrows") {
  std::vector<int> out(37, 0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK(category_of([] {
          parallel_for(8, 3, [](std::size_t i) {
            if (i == 5) fail(ErrorCategory::Data, "boom");
          });
        }) == ErrorCategory::Data);
}

TEST_CASE("grid selection matches candidate-by-candidate scoring") {
  const auto subjects = noisy_subjects(8, 4, 12, 1.2);
  const auto plan = build_plan(roster(4, 0), DatasetPolicy::LabOnly);
  // Rename so ids line up with the plan.
  auto named = subjects;
  for (int i = 0; i < 4; ++i) named[i].id = "L" + std::to_string(i);
  const auto data = index(named);
  for (auto kind : {models::ModelKind::Knn, models::ModelKind::RandomForest}) {
    const auto& inner = plan.folds[0].inner;
    const auto sel = select_hyperparams(kind, data, inner, 5, 1);
    const auto oracle = oracle_scores(kind, named, inner, 5);
    REQUIRE(sel.candidate_mean_f1.size() == oracle.size());
    for (std::size_t c = 0; c < oracle.size(); ++c) CHECK(sel.candidate_mean_f1[c] == doctest::Approx(oracle[c]));
    const auto best = std::max_element(oracle.begin(), oracle.end()) - oracle.begin();
    CHECK(sel.chosen == models::grid_candidates(kind)[static_cast<std::size_t>(best)]);
    CHECK(sel.inner_folds_used == 3);
  }
}

TEST_CASE("a known best k is chosen on every fold") {
  // One feature. Every group holds class 0 at the center, class 1 at +-0.9
  // and +-2. With two training subjects, a class-0 query sees two class-0
  // copies, then four class-1 points at 0.9, then four at 2: only k = 3 keeps
  // a class-0 majority. Class-1 queries are right for every k.
  std::vector<SubjectData> subjects;
  for (int s = 0; s < 4; ++s) {
    SubjectData d{"L" + std::to_string(s), models::Matrix(0, 1), {}};
    for (int g = 0; g < 6; ++g) {
      const double base = 100.0 * g;
      for (auto [off, label] : {std::pair{0.0, 0}, {0.9, 1}, {-0.9, 1}, {2.0, 1}, {-2.0, 1}}) {
        d.X.append_row(std::vector<double>{base + off});
        d.y.push_back(label);
      }
    }
    subjects.push_back(std::move(d));
  }
  const auto plan = build_plan(roster(4, 0), DatasetPolicy::LabOnly);
  const auto folds = tune_and_test(plan, models::ModelKind::Knn, subjects, 1, 1);
  const auto oracle = oracle_scores(models::ModelKind::Knn, subjects, plan.folds[0].inner, 1);
  const auto best = std::max_element(oracle.begin(), oracle.end()) - oracle.begin();
  CHECK(models::grid_candidates(models::ModelKind::Knn)[best].k == 3);
  CHECK(std::count(oracle.begin(), oracle.end(), oracle[best]) == 1);
  for (const auto& f : folds) {
    CHECK(f.selection.chosen.k == 3);
    CHECK(f.test_weighted_f1 == 1.0);
  }
}

TEST_CASE("constant-label data picks the first candidate") {
  std::vector<SubjectData> subjects;
  for (int s = 0; s < 3; ++s) {
    SubjectData d{"L" + std::to_string(s), models::Matrix(0, 2), {}};
    for (int i = 0; i < 10; ++i) {
      d.X.append_row(std::vector<double>{static_cast<double>(i), static_cast<double>(s)});
      d.y.push_back(4);
    }
    subjects.push_back(std::move(d));
  }
  const auto plan = build_plan(roster(3, 0), DatasetPolicy::LabOnly);
  for (auto kind : {models::ModelKind::Knn, models::ModelKind::RandomForest}) {
    for (const auto& f : tune_and_test(plan, kind, subjects, 0, 1)) {
      CHECK_FALSE(f.skipped);
      CHECK(f.selection.chosen == models::grid_candidates(kind).front());
      CHECK(f.test_weighted_f1 == 1.0);
    }
  }
  for (const auto& f : tune_and_test(plan, models::ModelKind::SvmRbf, subjects, 0, 1)) CHECK(f.skipped);
}

TEST_CASE("leakage probe and determinism") {
  auto subjects = noisy_subjects(3, 4, 10, 1.0);
  for (int i = 0; i < 4; ++i) subjects[i].id = "L" + std::to_string(i);
  const auto plan = build_plan(roster(4, 0), DatasetPolicy::LabOnly);
  const auto base = tune_and_test(plan, models::ModelKind::RandomForest, subjects, 9, 1);
  const auto parallel = tune_and_test(plan, models::ModelKind::RandomForest, subjects, 9, 3);
  oep::Rng rng(1);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    CHECK(parallel[f].selection.chosen == base[f].selection.chosen);
    CHECK(parallel[f].pred == base[f].pred);
    CHECK(parallel[f].selection.candidate_mean_f1 == base[f].selection.candidate_mean_f1);

    // Mutate the test subject; the fold's choice must not move.
    auto mutated = subjects;
    auto& t = mutated[f];
    std::vector<double> noise = t.X.data();
    for (auto& v : noise) v = rng.normal() * 50;
    t.X = models::Matrix(3, noise);
    for (auto& y : t.y) y = 1 - y;
    CvPlan single;
    single.folds = {plan.folds[f]};
    const auto r = tune_and_test(single, models::ModelKind::RandomForest, mutated, 9, 1);
    CHECK(r[0].selection.chosen == base[f].selection.chosen);
    CHECK(r[0].selection.candidate_mean_f1 == base[f].selection.candidate_mean_f1);
  }
}

TEST_CASE("pipeline cross-validation on three synthetic subjects") {
  std::vector<hierarchy::SessionWindows> windows;
  hierarchy::CascadeConfig cascade;
  for (int i = 0; i < 3; ++i) {
    synthgen::ScriptOptions o;
    o.subject_id = "C" + std::to_string(i);
    windows.push_back(hierarchy::extract_windows(synthgen::generate(synthgen::program_script(70 + i, o), 25), cascade));
  }
  PipelineCvConfig c;
  c.seed = 2;
  const auto r = pipeline_cv(windows, c);
  REQUIRE(r.folds.size() == 3);
  int evaluated = 0, total = 0;
  for (const auto& f : r.folds) {
    CHECK(f.roles.size() == 4);
    evaluated += f.stage1.n_windows;
  }
  for (const auto& w : windows)
    for (const auto& t : w.stage1.truth) total += t.label != kUnassigned;
  CHECK(evaluated == total);
  CHECK(r.stage1.n_windows == total);
  CHECK(r.stage1_oep_f1 > 0.8);
  CHECK(r.stage2.weighted_f1 > 0.8);
  for (const auto* rep : {&r.stage1, &r.stage2})
    for (const auto& c2 : rep->window) {
      CHECK(c2.f1 >= 0);
      CHECK(c2.f1 <= 1);
    }
}

}
