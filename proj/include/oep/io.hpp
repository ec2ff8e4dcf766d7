#pragma once

// On-disk formats: session CSV files, the model bundle container, timeline
// files, reports and run configuration.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "oep/cv.hpp"
#include "oep/eval.hpp"
#include "oep/hierarchy.hpp"

namespace oep::io {

namespace fs = std::filesystem;

// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& where);

// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

// Signal CSV: header `t,ax,ay,az,gx,gy,gz`, one row per sample.
ImuRecording parse_signal_csv(const std::string& text, double declared_rate_hz, const std::string& source = "signal");
std::string format_signal_csv(const ImuRecording& rec);

// Annotation CSV: header `start_s,end_s,label`.
std::vector<LabelInterval> parse_annotations_csv(const std::string& text, const std::string& source = "annotations");
std::string format_annotations_csv(const std::vector<LabelInterval>& intervals);

// Subject file: `key=value` lines, `#` comments. Keys: id, age, gender,
// weight, height, sarcopenia_status, dataset_id, sample_rate_hz.
struct SubjectFile {
  SubjectMeta meta;
  double sample_rate_hz = 100.0;
};
SubjectFile parse_subject(const std::string& text, const std::string& source = "subject");
std::string format_subject(const SubjectMeta& meta, double sample_rate_hz);

struct SessionPaths {
  fs::path signal;
  fs::path annotations;
  fs::path subject;

  // signal.csv, annotations.csv, subject.txt inside `dir`.
  static SessionPaths in(const fs::path& dir);
};

AnnotatedSession load_session(const SessionPaths& paths);
void save_session(const AnnotatedSession& session, const fs::path& dir);
// Every immediate subdirectory holding a signal.csv, sorted by name.
std::vector<fs::path> session_dirs(const fs::path& root);

// Model bundle container.
inline constexpr int kBundleMajor = 1;
inline constexpr int kBundleMinor = 0;
std::string serialize_bundle(const hierarchy::ModelBundle& bundle);
hierarchy::ModelBundle deserialize_bundle(const std::string& text);
void save_bundle(const hierarchy::ModelBundle& bundle, const fs::path& path);
hierarchy::ModelBundle load_bundle(const fs::path& path);

// Run-length timeline file.
std::string format_timeline(const hierarchy::PredictionTimeline& tl);
hierarchy::PredictionTimeline parse_timeline(const std::string& text, const std::string& source = "timeline");

// Run configuration (JSON object; unknown keys rejected).
struct RunConfig {
  hierarchy::CascadeConfig cascade;
  models::ModelKind kind = models::ModelKind::RandomForest;
  cv::DatasetPolicy dataset_policy = cv::DatasetPolicy::LabOnly;
  eval::TransitionPolicy transitions = eval::TransitionPolicy::Exclude;
  std::vector<double> iou_thresholds{0.5, 0.75};
  std::uint64_t seed = 0;
  int jobs = 1;
};
RunConfig parse_config(const std::string& json_text);
nlohmann::ordered_json to_json(const RunConfig& c);

nlohmann::ordered_json to_json(const eval::EvalReport& r);
std::string report_csv(const eval::EvalReport& r);
nlohmann::ordered_json to_json(const cv::PipelineCvResult& r, models::ModelKind kind);
std::string cv_summary_csv(const cv::PipelineCvResult& r, models::ModelKind kind);

// Feature CSV of one session's windows at one stage.
std::string features_csv(const hierarchy::SessionWindows& w, features::Stage stage);

}  // namespace oep::io
