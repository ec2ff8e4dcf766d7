#include "oep/hierarchy.hpp"

#include <algorithm>
#include <cmath>

namespace oep::hierarchy {

void CascadeConfig::validate() const {
  stage1_window.validate();
  stage2_window.validate();
  if (smooth_k_stage1 < 1 || smooth_k_stage2 < 1) fail(ErrorCategory::Config, "smoothing half-width must be >= 1");
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Stage1Raw: return "stage1_raw";
    case Provenance::Stage1Smoothed: return "stage1_smoothed";
    case Provenance::Stage2Level1: return "stage2_level1";
    case Provenance::Stage2Level2: return "stage2_level2";
  }
  return "?";
}

const char* role_name(ModelRole r) {
  switch (r) {
    case ModelRole::Stage1: return "stage1";
    case ModelRole::Level1: return "level1";
    case ModelRole::Walking: return "walking";
    case ModelRole::Standing: return "standing";
  }
  return "?";
}

std::vector<int> smooth_labels(std::span<const int> o, int k) {
  if (k < 1) fail(ErrorCategory::Parameter, "smoothing half-width must be >= 1");
  std::vector<int> p(o.begin(), o.end());
  const auto n = static_cast<std::ptrdiff_t>(o.size());
  std::vector<std::pair<int, int>> counts;  // (label, count), tiny alphabet
  for (std::ptrdiff_t i = k; i < n - k; ++i) {
    counts.clear();
    for (std::ptrdiff_t t = i - k; t <= i + k; ++t) {
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == o[t]; });
      if (it == counts.end()) counts.emplace_back(o[t], 1);
      else ++it->second;
    }
    int best = -1, best_count = 0;
    bool tie = false;
    for (const auto& [label, c] : counts) {
      if (c > best_count) {
        best = label;
        best_count = c;
        tie = false;
      } else if (c == best_count) {
        tie = true;
      }
    }
    p[i] = tie ? o[i] : best;
  }
  return p;
}

PredictionTimeline reconstruct_timeline(std::span<const int> window_labels, std::size_t window_len,
                                        std::size_t stride, std::size_t n_samples, double sample_rate_hz,
                                        LabelSpace space, Provenance provenance) {
  PredictionTimeline tl;
  tl.sample_rate_hz = sample_rate_hz;
  tl.space = space;
  tl.provenance = provenance;
  tl.labels.assign(n_samples, kUnassigned);
  const std::size_t nw = window_labels.size();
  if (nw == 0 || window_len == 0 || stride == 0) return tl;

  std::vector<std::pair<int, int>> counts;
  const std::size_t last_end = (nw - 1) * stride + window_len;
  for (std::size_t s = 0; s < n_samples; ++s) {
    if (s >= last_end) {
      tl.labels[s] = window_labels[nw - 1];
      continue;
    }
    // Windows w with w*stride <= s < w*stride + window_len.
    const std::size_t w_hi = std::min(nw - 1, s / stride);
    const std::size_t w_lo = s + 1 > window_len ? (s + 1 - window_len + stride - 1) / stride : 0;
    counts.clear();
    for (std::size_t w = w_lo; w <= w_hi; ++w) {
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == window_labels[w]; });
      if (it == counts.end()) counts.emplace_back(window_labels[w], 1);
      else ++it->second;
    }
    int best_count = 0;
    for (const auto& c : counts) best_count = std::max(best_count, c.second);
    int winners = 0;
    int label = kUnassigned;
    for (const auto& c : counts)
      if (c.second == best_count) {
        ++winners;
        label = c.first;
      }
    if (winners > 1) {
      // Nearest center among windows carrying a winning label.
      double best_dist = 0;
      label = kUnassigned;
      for (std::size_t w = w_lo; w <= w_hi; ++w) {
        const int l = window_labels[w];
        const auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == l; });
        if (it->second != best_count) continue;
        const double center = static_cast<double>(w * stride) + 0.5 * static_cast<double>(window_len) - 0.5;
        const double dist = std::abs(static_cast<double>(s) - center);
        if (label == kUnassigned || dist < best_dist) {
          best_dist = dist;
          label = l;
        }
      }
    }
    tl.labels[s] = label;
  }
  return tl;
}

std::optional<OepSpan> oep_interval(const PredictionTimeline& stage1) {
  if (stage1.space != LabelSpace::Stage1) fail(ErrorCategory::Parameter, "OEP interval needs a stage-1 timeline");
  std::optional<OepSpan> span;
  bool in_run = false;
  for (std::size_t s = 0; s < stage1.labels.size(); ++s) {
    const bool oep = stage1.labels[s] == kStage1Oep;
    if (oep) {
      const double t = static_cast<double>(s) / stage1.sample_rate_hz;
      if (!span) span = OepSpan{{t, t}, 0};
      span->interval.end_s = t;
      if (!in_run) ++span->runs;
    }
    in_run = oep;
  }
  // A single OEP sample still yields a non-degenerate interval.
  if (span && !(span->interval.end_s > span->interval.start_s))
    span->interval.end_s = span->interval.start_s + 1.0 / stage1.sample_rate_hz;
  return span;
}

StageWindows extract_stage_windows(const AnnotatedSession& session, const dsp::ConditionedSignal& signal,
                                   const dsp::WindowSpec& spec, LabelSpace truth_space) {
  const double fs = signal.sample_rate_hz;
  StageWindows w;
  w.length = spec.length_samples(fs);
  w.stride = spec.stride_samples(fs);
  const std::size_t count = dsp::window_count(signal.size(), w.length, w.stride);
  w.X = models::Matrix(0, features::kStage1Length);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * w.stride;
    w.starts.push_back(start);
    const auto view = features::SegmentView::of(signal, start, w.length);
    w.X.append_row(features::assemble(view, session.subject, features::Stage::Stage1).values);
    w.truth.push_back(majority_label(session, static_cast<double>(start) / fs, static_cast<double>(w.length) / fs,
                                     truth_space));
  }
  return w;
}

SessionWindows extract_windows(const AnnotatedSession& session, const CascadeConfig& config) {
  session.validate();
  config.validate();
  const auto signal = dsp::condition(session.recording);
  SessionWindows w;
  w.subject_id = session.subject.subject_id;
  w.subject = session.subject;
  w.intervals = session.intervals;
  w.sample_rate_hz = session.recording.sample_rate_hz;
  w.n_samples = session.recording.size();
  w.stage1 = extract_stage_windows(session, signal, config.stage1_window, LabelSpace::Stage1);
  w.stage2 = extract_stage_windows(session, signal, config.stage2_window, LabelSpace::Activity);
  if (auto span = annotated_oep_span(session)) w.annotated_oep = features::OepInterval{span->first, span->second};
  return w;
}

models::Matrix with_relative_start(const StageWindows& w, double fs, const features::OepInterval& oep) {
  models::Matrix out(0, features::kStage2Length);
  std::vector<double> row(features::kStage2Length);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto base = w.X.row(i);
    std::copy(base.begin(), base.end(), row.begin());
    row.back() = features::relative_start_time(static_cast<double>(w.starts[i]) / fs, oep);
    out.append_row(row);
  }
  return out;
}

RoleRows role_rows(const SessionWindows& w, ModelRole role) {
  RoleRows out;
  if (role == ModelRole::Stage1) {
    out.X = models::Matrix(0, features::kStage1Length);
    for (std::size_t i = 0; i < w.stage1.size(); ++i) {
      const auto& t = w.stage1.truth[i];
      if (!t.pure) continue;
      out.X.append_row(w.stage1.X.row(i));
      out.y.push_back(t.label);
    }
    return out;
  }
  out.X = models::Matrix(0, features::kStage2Length);
  if (!w.annotated_oep) return out;
  std::vector<double> row(features::kStage2Length);
  for (std::size_t i = 0; i < w.stage2.size(); ++i) {
    const auto& t = w.stage2.truth[i];
    if (!t.pure) continue;
    const auto label = ActivityLabel::from_code(t.label);
    if (label.tier() != Tier::Oep) continue;
    const Level1 group = level1_of(label);
    int y = 0;
    switch (role) {
      case ModelRole::Level1: y = static_cast<int>(group); break;
      case ModelRole::Walking:
        if (group != Level1::GeneralWalking) continue;
        y = label.code();
        break;
      case ModelRole::Standing:
        if (group != Level1::GeneralStanding) continue;
        y = label.code();
        break;
      case ModelRole::Stage1: break;
    }
    const auto base = w.stage2.X.row(i);
    std::copy(base.begin(), base.end(), row.begin());
    row.back() = features::relative_start_time(static_cast<double>(w.stage2.starts[i]) / w.sample_rate_hz,
                                               *w.annotated_oep);
    out.X.append_row(row);
    out.y.push_back(y);
  }
  return out;
}

Stage1Result stage1_classify(const SessionWindows& w, const models::TrainedModel& model, const CascadeConfig& config) {
  if (w.stage1.size() == 0)
    fail(ErrorCategory::Data, "session '" + w.subject_id +
                                  "' is shorter than one stage-1 window; pad the recording or exclude it");
  Stage1Result r;
  r.raw = models::predict_rows(model, w.stage1.X);
  for (int l : r.raw)
    if (l != kStage1Adl && l != kStage1Oep) fail(ErrorCategory::Config, "stage-1 model predicts a non-binary label");
  r.smoothed = smooth_labels(r.raw, config.smooth_k_stage1);
  r.timeline = reconstruct_timeline(r.smoothed, w.stage1.length, w.stage1.stride, w.n_samples, w.sample_rate_hz,
                                    LabelSpace::Stage1, Provenance::Stage1Smoothed);
  r.oep = oep_interval(r.timeline);
  return r;
}

Stage1Result stage1_classify(const AnnotatedSession& session, const models::TrainedModel& model,
                             const CascadeConfig& config) {
  return stage1_classify(extract_windows(session, config), model, config);
}

Stage2Result stage2_classify(const SessionWindows& w, const std::optional<OepSpan>& oep, const ModelBundle& bundle,
                             const CascadeConfig& config) {
  const std::size_t n = w.stage2.size();
  const double fs = w.sample_rate_hz;
  Stage2Result r;
  r.level1.assign(n, static_cast<int>(Level1::Adl));
  r.level2_raw.assign(n, ActivityLabel::kAdlCode);
  r.inside.assign(n, false);
  if (oep) {
    if (!bundle.has_level1 || !bundle.has_walking || !bundle.has_standing)
      fail(ErrorCategory::Config, "stage 2 needs the level-1, walking and standing models");
    const auto X = with_relative_start(w.stage2, fs, oep->interval);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = w.stage2.center_s(i, fs);
      if (c < oep->interval.start_s || c > oep->interval.end_s) continue;
      r.inside[i] = true;
      const int g = models::predict(bundle.level1, X.row(i));
      if (g < 0 || g >= kNumLevel1Oep) fail(ErrorCategory::Config, "level-1 model predicts a non-exercise group");
      r.level1[i] = g;
      int leaf = 0;
      switch (static_cast<Level1>(g)) {
        case Level1::GeneralWalking: leaf = models::predict(bundle.walking, X.row(i)); break;
        case Level1::GeneralStanding: leaf = models::predict(bundle.standing, X.row(i)); break;
        case Level1::TrunkMobilizer: leaf = static_cast<int>(Level2::TrunkMobilizer); break;
        case Level1::AbdominalMuscles: leaf = static_cast<int>(Level2::AbdominalMuscles); break;
        case Level1::SitToStand: leaf = static_cast<int>(Level2::SitToStand); break;
        case Level1::Sitting: leaf = static_cast<int>(Level2::Sitting); break;
        default: break;
      }
      if (leaf < 0 || leaf >= kNumLevel2 || static_cast<int>(level1_of(static_cast<Level2>(leaf))) != g)
        fail(ErrorCategory::Config, "sub-model output is not a member of its exercise group");
      r.level2_raw[i] = leaf;
    }
  }
  // Smooth only the run of windows inside the session so the session
  // boundary itself is never moved by stage 2.
  r.level2 = r.level2_raw;
  const auto first = std::find(r.inside.begin(), r.inside.end(), true);
  if (first != r.inside.end()) {
    const auto b = static_cast<std::size_t>(first - r.inside.begin());
    std::size_t e = b;
    while (e < n && r.inside[e]) ++e;
    const auto smoothed =
        smooth_labels(std::span<const int>(r.level2_raw).subspan(b, e - b), config.smooth_k_stage2);
    std::copy(smoothed.begin(), smoothed.end(), r.level2.begin() + static_cast<std::ptrdiff_t>(b));
  }
  r.timeline = reconstruct_timeline(r.level2, w.stage2.length, w.stage2.stride, w.n_samples, fs, LabelSpace::Activity,
                                    Provenance::Stage2Level2);
  return r;
}

PipelineResult run_pipeline(const SessionWindows& w, const ModelBundle& bundle, const CascadeConfig& config) {
  if (!bundle.has_stage1) fail(ErrorCategory::Config, "model bundle has no stage-1 model");
  PipelineResult r;
  r.stage1 = stage1_classify(w, bundle.stage1, config);
  r.stage2_skipped = !r.stage1.oep.has_value();
  r.stage2 = stage2_classify(w, r.stage1.oep, bundle, config);
  return r;
}

PipelineResult run_pipeline(const AnnotatedSession& session, const ModelBundle& bundle) {
  return run_pipeline(extract_windows(session, bundle.config), bundle, bundle.config);
}

PredictionTimeline truth_timeline(std::span<const LabelInterval> intervals, std::size_t n_samples,
                                  double fs, LabelSpace space) {
  PredictionTimeline tl;
  tl.sample_rate_hz = fs;
  tl.space = space;
  tl.provenance = Provenance::Stage2Level2;
  tl.labels.assign(n_samples, kUnassigned);
  for (const auto& iv : intervals) {
    const auto b = static_cast<std::size_t>(std::max(0.0, std::ceil(iv.start_s * fs - 1e-9)));
    const auto e = std::min(n_samples, static_cast<std::size_t>(std::max(0.0, std::ceil(iv.end_s * fs - 1e-9))));
    for (std::size_t s = b; s < e; ++s) tl.labels[s] = project(iv.label, space);
  }
  return tl;
}

PredictionTimeline truth_timeline(const AnnotatedSession& session, LabelSpace space) {
  return truth_timeline(session.intervals, session.recording.size(), session.recording.sample_rate_hz, space);
}

PredictionTimeline truth_timeline(const SessionWindows& w, LabelSpace space) {
  return truth_timeline(w.intervals, w.n_samples, w.sample_rate_hz, space);
}

}  // namespace oep::hierarchy
