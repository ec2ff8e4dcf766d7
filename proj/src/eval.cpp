#include "oep/eval.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace oep::eval {

ClassScore score_from_counts(int label, const ConfusionCounts& c) {
  ClassScore s;
  s.label = label;
  s.counts = c;
  s.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  s.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<ClassScore> window_scores(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) fail(ErrorCategory::Data, "truth and prediction lengths differ");
  std::map<int, ConfusionCounts> counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) {
      ++counts[truth[i]].tp;
    } else {
      ++counts[truth[i]].fn;
      ++counts[pred[i]].fp;
    }
  }
  std::vector<ClassScore> out;
  for (const auto& [label, c] : counts) out.push_back(score_from_counts(label, c));
  return out;
}

double weighted_f1(std::span<const double> f1, std::span<const double> support) {
  if (f1.size() != support.size()) fail(ErrorCategory::Data, "f1 and support lengths differ");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (support[i] < 0) fail(ErrorCategory::Parameter, "class support must be non-negative");
    num += f1[i] * support[i];
    den += support[i];
  }
  if (!(den > 0)) fail(ErrorCategory::Parameter, "weighted f1 needs a positive total support");
  return num / den;
}

double weighted_f1(const std::vector<ClassScore>& scores, int exclude_label) {
  std::vector<double> f1, support;
  for (const auto& s : scores) {
    if (s.label == exclude_label && exclude_label != kUnassigned) continue;
    f1.push_back(s.f1);
    support.push_back(s.support());
  }
  return weighted_f1(f1, support);
}

std::vector<LabeledSegment> extract_segments(std::span<const int> labels, double fs) {
  std::vector<LabeledSegment> out;
  std::size_t b = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[b]) {
      out.push_back({labels[b], static_cast<double>(b) / fs, static_cast<double>(i) / fs});
      b = i;
    }
  }
  return out;
}

std::vector<LabeledSegment> extract_segments(const hierarchy::PredictionTimeline& timeline) {
  return extract_segments(timeline.labels, timeline.sample_rate_hz);
}

double iou(const LabeledSegment& a, const LabeledSegment& b) {
  const double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
  if (inter <= 0) return 0.0;
  const double uni = std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return inter / uni;
}

namespace {

// Lexicographic matching objective; componentwise additive.
struct Objective {
  int tp = 0;
  int matched = 0;
  int neg_fp = 0;
  double iou = 0;

  Objective operator+(const Objective& o) const { return {tp + o.tp, matched + o.matched, neg_fp + o.neg_fp, iou + o.iou}; }
  bool operator<(const Objective& o) const {
    if (tp != o.tp) return tp < o.tp;
    if (matched != o.matched) return matched < o.matched;
    if (neg_fp != o.neg_fp) return neg_fp < o.neg_fp;
    return iou < o.iou;
  }
};

bool ruled_fp(const LabeledSegment& p, const LabeledSegment& t) { return t.length() <= p.length(); }

}  // namespace

SegmentMatching match_segments(std::span<const LabeledSegment> pred, std::span<const LabeledSegment> truth,
                               double threshold) {
  struct Edge {
    std::size_t p, t;
    Objective w;
  };
  // Both lists are disjoint and ordered, so overlapping pairs never cross:
  // sorted by pred index they are also sorted by true index, and a matching
  // is a chain strictly increasing in both.
  std::vector<Edge> edges;
  std::size_t t0 = 0;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    while (t0 < truth.size() && truth[t0].end_s <= pred[p].start_s) ++t0;
    for (std::size_t t = t0; t < truth.size() && truth[t].start_s < pred[p].end_s; ++t) {
      const double v = iou(pred[p], truth[t]);
      if (v <= 0) continue;
      Objective w;
      w.matched = 1;
      w.iou = v;
      if (v >= threshold) w.tp = 1;
      else if (ruled_fp(pred[p], truth[t])) w.neg_fp = -1;
      edges.push_back({p, t, w});
    }
  }
  const std::size_t e = edges.size();
  std::vector<Objective> best(e);
  std::vector<std::ptrdiff_t> prev(e, -1);
  for (std::size_t i = 0; i < e; ++i) {
    Objective base;
    for (std::size_t j = 0; j < i; ++j) {
      if (edges[j].p < edges[i].p && edges[j].t < edges[i].t && base < best[j]) {
        base = best[j];
        prev[i] = static_cast<std::ptrdiff_t>(j);
      }
    }
    best[i] = base + edges[i].w;
  }
  SegmentMatching m;
  std::ptrdiff_t cur = -1;
  Objective top;
  for (std::size_t i = 0; i < e; ++i)
    if (top < best[i]) {
      top = best[i];
      cur = static_cast<std::ptrdiff_t>(i);
    }
  for (; cur >= 0; cur = prev[static_cast<std::size_t>(cur)]) {
    const auto& ed = edges[static_cast<std::size_t>(cur)];
    m.pairs.emplace_back(ed.p, ed.t);
  }
  std::reverse(m.pairs.begin(), m.pairs.end());
  return m;
}

SegmentScore score_matching(int label, std::span<const LabeledSegment> pred, std::span<const LabeledSegment> truth,
                            const SegmentMatching& m, double threshold) {
  SegmentScore s;
  s.label = label;
  s.n_pred = static_cast<int>(pred.size());
  s.n_true = static_cast<int>(truth.size());
  for (const auto& [p, t] : m.pairs) {
    if (iou(pred[p], truth[t]) >= threshold) ++s.tp;
    else if (ruled_fp(pred[p], truth[t])) ++s.fp_matched;
    else ++s.fn_matched;
  }
  const int matched = static_cast<int>(m.pairs.size());
  s.fp = (s.n_pred - matched) + s.fp_matched;
  s.fn = (s.n_true - matched) + s.fn_matched;
  const auto sc = score_from_counts(label, {s.tp, s.fp, s.fn});
  s.precision = sc.precision;
  s.recall = sc.recall;
  s.f1 = sc.f1;
  return s;
}

std::vector<SegmentScore> segmental_scores(std::span<const int> truth, std::span<const int> pred, double fs,
                                           double threshold) {
  if (!(threshold > 0) || threshold > 1) fail(ErrorCategory::Parameter, "IoU threshold must lie in (0, 1]");
  if (truth.size() != pred.size()) fail(ErrorCategory::Data, "timelines have different lengths");
  const auto ts = extract_segments(truth, fs);
  const auto ps = extract_segments(pred, fs);
  std::set<int> labels;
  for (const auto& s : ts)
    if (s.label != kUnassigned) labels.insert(s.label);
  for (const auto& s : ps)
    if (s.label != kUnassigned) labels.insert(s.label);
  std::vector<SegmentScore> out;
  for (int label : labels) {
    std::vector<LabeledSegment> tc, pc;
    for (const auto& s : ts)
      if (s.label == label) tc.push_back(s);
    for (const auto& s : ps)
      if (s.label == label) pc.push_back(s);
    out.push_back(score_matching(label, pc, tc, match_segments(pc, tc, threshold), threshold));
  }
  return out;
}

std::vector<SegmentScore> segmental_scores(const hierarchy::PredictionTimeline& truth,
                                           const hierarchy::PredictionTimeline& pred, double threshold) {
  if (truth.sample_rate_hz != pred.sample_rate_hz) fail(ErrorCategory::Data, "timelines have different rates");
  return segmental_scores(truth.labels, pred.labels, truth.sample_rate_hz, threshold);
}

const char* policy_name(TransitionPolicy p) { return p == TransitionPolicy::Exclude ? "exclude" : "count_as_fp"; }

TransitionPolicy parse_policy(const std::string& s) {
  if (s == "exclude") return TransitionPolicy::Exclude;
  if (s == "fp" || s == "count_as_fp") return TransitionPolicy::CountAsFp;
  fail(ErrorCategory::Config, "unknown transition policy '" + s + "' (expected exclude or fp)");
}

LabelPairs apply_transition_policy(std::span<const int> truth, std::span<const int> pred, TransitionPolicy policy,
                                   int transition_label) {
  if (truth.size() != pred.size()) fail(ErrorCategory::Data, "truth and prediction lengths differ");
  LabelPairs out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnassigned) continue;
    if (policy == TransitionPolicy::Exclude && truth[i] == transition_label && transition_label != kUnassigned)
      continue;
    out.truth.push_back(truth[i]);
    out.pred.push_back(pred[i]);
  }
  return out;
}

namespace {

int transition_code(LabelSpace space) {
  switch (space) {
    case LabelSpace::Activity: return ActivityLabel::kTransitionCode;
    case LabelSpace::Level1: return static_cast<int>(Level1::Transition);
    case LabelSpace::Stage1: return kUnassigned;
  }
  return kUnassigned;
}

}  // namespace

EvalReport evaluate(std::span<const int> window_truth, std::span<const int> window_pred,
                    const hierarchy::PredictionTimeline& truth_timeline,
                    const hierarchy::PredictionTimeline& pred_timeline, std::span<const double> thresholds,
                    TransitionPolicy policy) {
  EvalReport r;
  r.space = truth_timeline.space;
  r.policy = policy;
  const int transition = transition_code(r.space);
  const auto pairs = apply_transition_policy(window_truth, window_pred, policy, transition);
  r.n_windows = static_cast<int>(pairs.truth.size());
  r.window = window_scores(pairs.truth, pairs.pred);
  int support = 0;
  for (const auto& c : r.window)
    if (c.label != transition) support += c.support();
  r.weighted_f1 = support > 0 ? weighted_f1(r.window, transition) : 0.0;

  std::vector<int> truth_labels = truth_timeline.labels;
  if (policy == TransitionPolicy::Exclude && transition != kUnassigned)
    for (int& l : truth_labels)
      if (l == transition) l = kUnassigned;
  for (double th : thresholds) {
    SegmentalAtThreshold s;
    s.threshold = th;
    s.classes = segmental_scores(truth_labels, pred_timeline.labels, truth_timeline.sample_rate_hz, th);
    r.segmental.push_back(std::move(s));
  }
  return r;
}

namespace {

// Label covering most samples of [begin, end); ties to the label seen first.
int window_majority(std::span<const int> labels) {
  std::map<int, int> count;
  std::vector<int> order;
  for (int l : labels)
    if (count[l]++ == 0) order.push_back(l);
  int best = order.front();
  for (int l : order)
    if (count[l] > count[best]) best = l;
  return best;
}

}  // namespace

EvalReport evaluate_timelines(const hierarchy::PredictionTimeline& truth, const hierarchy::PredictionTimeline& pred,
                              const dsp::WindowSpec& spec, std::span<const double> thresholds,
                              TransitionPolicy policy) {
  if (truth.labels.size() != pred.labels.size())
    fail(ErrorCategory::Data, "timelines differ in length: " + std::to_string(truth.labels.size()) + " vs " +
                                  std::to_string(pred.labels.size()) + " samples");
  if (truth.space != pred.space) fail(ErrorCategory::Data, "timelines use different label spaces");
  if (truth.sample_rate_hz != pred.sample_rate_hz) fail(ErrorCategory::Data, "timelines differ in sample rate");
  spec.validate();
  const std::size_t len = spec.length_samples(truth.sample_rate_hz);
  const std::size_t stride = spec.stride_samples(truth.sample_rate_hz);
  std::vector<int> wt, wp;
  const std::span<const int> t(truth.labels), p(pred.labels);
  for (std::size_t b = 0; b + len <= t.size(); b += stride) {
    wt.push_back(window_majority(t.subspan(b, len)));
    wp.push_back(window_majority(p.subspan(b, len)));
  }
  return evaluate(wt, wp, truth, pred, thresholds, policy);
}

}  // namespace oep::eval
