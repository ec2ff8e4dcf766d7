#pragma once

// Two-stage cascade: stage 1 separates exercise sessions from daily life on
// long windows; stage 2 labels short windows inside the detected session with
// six merged exercise groups, then refines walking and standing groups.

#include <optional>
#include <span>
#include <vector>

#include "oep/core.hpp"
#include "oep/dsp.hpp"
#include "oep/features.hpp"
#include "oep/models.hpp"

namespace oep::hierarchy {

struct CascadeConfig {
  dsp::WindowSpec stage1_window{600.0, 0.75};
  dsp::WindowSpec stage2_window{6.0, 0.5};
  int smooth_k_stage1 = 3;
  int smooth_k_stage2 = 5;

  void validate() const;
};

enum class Provenance { Stage1Raw, Stage1Smoothed, Stage2Level1, Stage2Level2 };
const char* provenance_name(Provenance p);

struct PredictionTimeline {
  double sample_rate_hz = 0;
  LabelSpace space = LabelSpace::Activity;
  Provenance provenance = Provenance::Stage2Level2;
  std::vector<int> labels;  // per sample, kUnassigned where nothing was predicted

  double duration_s() const { return static_cast<double>(labels.size()) / sample_rate_hz; }
};

// Mode filter of half-width k over the original sequence. The first and last
// k entries are copied; ties keep the original label.
std::vector<int> smooth_labels(std::span<const int> labels, int k);

// Per-sample majority over covering windows; ties go to the window whose
// center is nearest (earlier window on equal distance). Samples after the last
// window take its label.
PredictionTimeline reconstruct_timeline(std::span<const int> window_labels, std::size_t window_len,
                                        std::size_t stride, std::size_t n_samples, double sample_rate_hz,
                                        LabelSpace space, Provenance provenance);

struct OepSpan {
  features::OepInterval interval;
  int runs = 0;  // number of separate exercise runs merged into the interval
};

// First to last exercise-labeled sample of a stage-1 timeline.
std::optional<OepSpan> oep_interval(const PredictionTimeline& stage1);

// Windowed features of one session for both stages, extracted once.
struct StageWindows {
  std::vector<std::size_t> starts;
  std::size_t length = 0;
  std::size_t stride = 0;
  models::Matrix X;                // 173 columns (no relative start time)
  std::vector<WindowLabel> truth;  // stage-1 space for stage 1, activity space for stage 2

  std::size_t size() const { return starts.size(); }
  double center_s(std::size_t w, double fs) const {
    return (static_cast<double>(starts[w]) + 0.5 * static_cast<double>(length)) / fs;
  }
};

struct SessionWindows {
  std::string subject_id;
  SubjectMeta subject;
  std::vector<LabelInterval> intervals;
  double sample_rate_hz = 0;
  std::size_t n_samples = 0;
  StageWindows stage1;
  StageWindows stage2;
  std::optional<features::OepInterval> annotated_oep;
};

StageWindows extract_stage_windows(const AnnotatedSession& session, const dsp::ConditionedSignal& signal,
                                   const dsp::WindowSpec& spec, LabelSpace truth_space);
SessionWindows extract_windows(const AnnotatedSession& session, const CascadeConfig& config);

// Appends the relative start time column to stage-2 window features.
models::Matrix with_relative_start(const StageWindows& w, double fs, const features::OepInterval& oep);

struct ModelBundle {
  models::TrainedModel stage1;
  models::TrainedModel level1;
  models::TrainedModel walking;
  models::TrainedModel standing;
  CascadeConfig config;
  bool has_stage1 = false, has_level1 = false, has_walking = false, has_standing = false;
};

enum class ModelRole { Stage1, Level1, Walking, Standing };
const char* role_name(ModelRole r);

// Training rows of one role from one session: pure windows only. Stage-2 rows
// use the annotated exercise span for the relative start time.
struct RoleRows {
  models::Matrix X;
  std::vector<int> y;
};
RoleRows role_rows(const SessionWindows& w, ModelRole role);

struct Stage1Result {
  std::vector<int> raw;       // per stage-1 window, Stage1 space
  std::vector<int> smoothed;  // after the mode filter
  PredictionTimeline timeline;
  std::optional<OepSpan> oep;
};

Stage1Result stage1_classify(const SessionWindows& w, const models::TrainedModel& model, const CascadeConfig& config);
Stage1Result stage1_classify(const AnnotatedSession& session, const models::TrainedModel& model,
                             const CascadeConfig& config);

struct Stage2Result {
  std::vector<int> level1;          // per stage-2 window, Level1 space (ADL outside the session)
  std::vector<int> level2_raw;      // Activity space before smoothing
  std::vector<int> level2;          // Activity space after smoothing
  std::vector<bool> inside;         // window center inside the detected session
  PredictionTimeline timeline;      // Activity space, Stage2Level2
};

Stage2Result stage2_classify(const SessionWindows& w, const std::optional<OepSpan>& oep, const ModelBundle& bundle,
                             const CascadeConfig& config);

struct PipelineResult {
  Stage1Result stage1;
  Stage2Result stage2;
  bool stage2_skipped = false;
};

PipelineResult run_pipeline(const SessionWindows& w, const ModelBundle& bundle, const CascadeConfig& config);
PipelineResult run_pipeline(const AnnotatedSession& session, const ModelBundle& bundle);

// Ground-truth per-sample timeline from annotations (unlabeled = kUnassigned).
PredictionTimeline truth_timeline(std::span<const LabelInterval> intervals, std::size_t n_samples,
                                  double sample_rate_hz, LabelSpace space);
PredictionTimeline truth_timeline(const AnnotatedSession& session, LabelSpace space);
PredictionTimeline truth_timeline(const SessionWindows& w, LabelSpace space);

}  // namespace oep::hierarchy
