#pragma once

// Leave-one-subject-out evaluation with a nested leave-one-subject-out grid
// search for every model.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oep/eval.hpp"
#include "oep/hierarchy.hpp"
#include "oep/models.hpp"

namespace oep::cv {

enum class DatasetPolicy { LabOnly, HomeWithLabTrain };
const char* policy_name(DatasetPolicy p);
DatasetPolicy parse_dataset_policy(const std::string& s);

struct SubjectRef {
  std::string id;
  DatasetId dataset = DatasetId::Lab;
};

struct InnerFold {
  std::string validation;
  std::vector<std::string> training;
};

struct OuterFold {
  std::string test;
  std::vector<std::string> training;
  std::vector<InnerFold> inner;
};

struct CvPlan {
  DatasetPolicy policy = DatasetPolicy::LabOnly;
  std::vector<OuterFold> folds;
};

// LabOnly rotates over the lab subjects. HomeWithLabTrain rotates over the
// home subjects and adds every lab subject to each training set (outer and
// inner); lab subjects are never validated or tested on. Throws Parameter
// when fewer than three subjects rotate.
CvPlan build_plan(const std::vector<SubjectRef>& subjects, DatasetPolicy policy);

// Runs fn(0..n-1) on up to `jobs` threads. Each index writes its own slot, so
// results do not depend on `jobs`. The lowest-index exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Windows of one subject for one model.
struct SubjectData {
  std::string id;
  models::Matrix X;
  std::vector<int> y;
};

struct Selection {
  models::Hyperparams chosen;
  double mean_f1 = 0;
  std::vector<double> candidate_mean_f1;  // in grid order
  int inner_folds_used = 0;
};

// Grid search by mean inner-fold weighted f1; the first candidate wins ties.
Selection select_hyperparams(models::ModelKind kind, const std::map<std::string, const SubjectData*>& data,
                             const std::vector<InnerFold>& inner, std::uint64_t seed, int jobs);

struct FoldResult {
  std::string test_subject;
  bool skipped = false;
  std::string warning;
  Selection selection;
  std::vector<int> truth;
  std::vector<int> pred;
  double test_weighted_f1 = 0;
};

std::vector<FoldResult> tune_and_test(const CvPlan& plan, models::ModelKind kind,
                                      const std::vector<SubjectData>& subjects, std::uint64_t seed, int jobs);

struct PipelineCvConfig {
  hierarchy::CascadeConfig cascade;
  models::ModelKind kind = models::ModelKind::RandomForest;
  DatasetPolicy policy = DatasetPolicy::LabOnly;
  eval::TransitionPolicy transitions = eval::TransitionPolicy::Exclude;
  std::vector<double> thresholds{0.5, 0.75};
  std::uint64_t seed = 0;
  int jobs = 1;
  bool stage1_only = false;
};

struct RoleSelection {
  hierarchy::ModelRole role = hierarchy::ModelRole::Stage1;
  Selection selection;
  bool trained = false;
};

struct PipelineFold {
  std::string test_subject;
  std::vector<RoleSelection> roles;
  std::vector<std::string> warnings;
  bool stage2_skipped = false;
  std::vector<int> stage1_truth, stage1_pred;  // per stage-1 window, Stage1 space, smoothed
  std::vector<int> stage1_raw;
  std::vector<int> stage2_truth, stage2_pred;  // per stage-2 window, Activity space
  eval::EvalReport stage1;
  eval::EvalReport stage2;
};

// Folds pooled: window scores recomputed over all folds' windows, segmental
// counts summed per class.
struct PipelineCvResult {
  std::vector<PipelineFold> folds;
  eval::EvalReport stage1;
  eval::EvalReport stage2;
  double stage1_oep_f1 = 0;  // window-wise f1 of the exercise class
};

PipelineCvResult pipeline_cv(const std::vector<hierarchy::SessionWindows>& sessions, const PipelineCvConfig& config);

struct TrainedBundle {
  hierarchy::ModelBundle bundle;
  std::vector<RoleSelection> roles;
};

// Fits all four models on every session. Hyperparameters come from a
// leave-one-subject-out grid search over the sessions; with a single subject
// the first grid candidate is used. Throws Training when a role cannot be fit.
TrainedBundle train_bundle(const std::vector<hierarchy::SessionWindows>& sessions,
                           const hierarchy::CascadeConfig& cascade, models::ModelKind kind, std::uint64_t seed,
                           int jobs);

// Pooled report over several fold reports.
eval::EvalReport pool_reports(const std::vector<std::vector<int>>& truths, const std::vector<std::vector<int>>& preds,
                              const std::vector<const eval::EvalReport*>& reports, LabelSpace space,
                              eval::TransitionPolicy policy);

}  // namespace oep::cv
