#pragma once

#include <span>
#include <vector>

#include "oep/core.hpp"
#include "oep/hierarchy.hpp"

namespace oep::eval {

struct ConfusionCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct ClassScore {
  int label = kUnassigned;
  ConfusionCounts counts;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int support() const { return counts.tp + counts.fn; }  // N_c, true labels of the class
};

// precision/recall/f1 from counts; empty denominators give 0.
ClassScore score_from_counts(int label, const ConfusionCounts& c);

// Per-class scores over every label present in truth or prediction, ascending
// label order. Throws Data on length mismatch.
std::vector<ClassScore> window_scores(std::span<const int> truth, std::span<const int> pred);

// Support-weighted mean of per-class f1.
double weighted_f1(std::span<const double> f1, std::span<const double> support);
// Same over window scores, skipping `exclude_label` (e.g. Transition).
double weighted_f1(const std::vector<ClassScore>& scores, int exclude_label = kUnassigned);

struct LabeledSegment {
  int label = kUnassigned;
  double start_s = 0;
  double end_s = 0;
  double length() const { return end_s - start_s; }
};

// Maximal constant runs (including unassigned runs), in temporal order.
std::vector<LabeledSegment> extract_segments(const hierarchy::PredictionTimeline& timeline);
std::vector<LabeledSegment> extract_segments(std::span<const int> labels, double sample_rate_hz);

double iou(const LabeledSegment& a, const LabeledSegment& b);

struct SegmentScore {
  int label = kUnassigned;
  int n_pred = 0;
  int n_true = 0;
  int tp = 0;
  int fp = 0;  // unmatched predictions + below-threshold pairs with the true segment not longer
  int fn = 0;  // unmatched truths + below-threshold pairs with the true segment longer
  int fp_matched = 0;
  int fn_matched = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Matching of one class: pairs (pred index, true index).
struct SegmentMatching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Best one-to-one matching between predicted and true segments of one class
// (each list disjoint and ordered). Maximizes, in order: pairs at or above the
// threshold, matched pairs, fewest below-threshold pairs ruled false positive,
// total IoU.
SegmentMatching match_segments(std::span<const LabeledSegment> pred, std::span<const LabeledSegment> truth,
                               double threshold);
SegmentScore score_matching(int label, std::span<const LabeledSegment> pred, std::span<const LabeledSegment> truth,
                            const SegmentMatching& m, double threshold);

// Segmental IoU scores for every label present in either timeline (unassigned
// excluded), ascending label order. Throws Parameter unless 0 < threshold <= 1.
std::vector<SegmentScore> segmental_scores(const hierarchy::PredictionTimeline& truth,
                                           const hierarchy::PredictionTimeline& pred, double threshold);
std::vector<SegmentScore> segmental_scores(std::span<const int> truth, std::span<const int> pred,
                                           double sample_rate_hz, double threshold);

enum class TransitionPolicy { Exclude, CountAsFp };
const char* policy_name(TransitionPolicy p);
TransitionPolicy parse_policy(const std::string& s);

struct LabelPairs {
  std::vector<int> truth;
  std::vector<int> pred;
};

// Drops unlabeled truth entries; under Exclude also drops entries whose truth
// is `transition_label`. Under CountAsFp those stay, so predictions on them
// count as false positives of the predicted class.
LabelPairs apply_transition_policy(std::span<const int> truth, std::span<const int> pred, TransitionPolicy policy,
                                   int transition_label = ActivityLabel::kTransitionCode);

struct SegmentalAtThreshold {
  double threshold = 0;
  std::vector<SegmentScore> classes;
};

struct EvalReport {
  LabelSpace space = LabelSpace::Activity;
  TransitionPolicy policy = TransitionPolicy::Exclude;
  int n_windows = 0;
  std::vector<ClassScore> window;
  double weighted_f1 = 0;
  std::vector<SegmentalAtThreshold> segmental;
};

// Window-wise scores after the transition policy plus segmental scores of the
// two timelines at each threshold. Under Exclude, true Transition samples are
// removed from the truth timeline before segmenting.
EvalReport evaluate(std::span<const int> window_truth, std::span<const int> window_pred,
                    const hierarchy::PredictionTimeline& truth_timeline,
                    const hierarchy::PredictionTimeline& pred_timeline, std::span<const double> thresholds,
                    TransitionPolicy policy);

// Scores a predicted timeline against a truth timeline. Windows of `spec`
// tile both; each window takes the label covering most of its samples (ties
// to the label seen first).
EvalReport evaluate_timelines(const hierarchy::PredictionTimeline& truth, const hierarchy::PredictionTimeline& pred,
                              const dsp::WindowSpec& spec, std::span<const double> thresholds,
                              TransitionPolicy policy);

}  // namespace oep::eval
