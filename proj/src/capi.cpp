#include "oep/oep.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "oep/cv.hpp"
#include "oep/io.hpp"
#include "oep/synthgen.hpp"

struct oep_session {
  oep::AnnotatedSession value;
};
struct oep_bundle {
  oep::hierarchy::ModelBundle value;
};
struct oep_timeline {
  oep::hierarchy::PredictionTimeline value;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
oep_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return OEP_OK;
  } catch (const oep::Error& e) {
    last_error = e.what();
    return static_cast<oep_status>(e.category());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return OEP_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return OEP_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) oep::fail(oep::ErrorCategory::Parameter, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

oep::io::RunConfig config_of(const char* json) { return oep::io::parse_config(json ? json : "{}"); }

std::vector<oep::hierarchy::SessionWindows> windows_of(const oep_session* const* sessions, std::size_t n,
                                                       const oep::hierarchy::CascadeConfig& cascade, int jobs) {
  require(sessions, "sessions");
  for (std::size_t i = 0; i < n; ++i) require(sessions[i], "session");
  std::vector<oep::hierarchy::SessionWindows> out(n);
  oep::cv::parallel_for(n, jobs, [&](std::size_t i) { out[i] = oep::hierarchy::extract_windows(sessions[i]->value, cascade); });
  return out;
}

oep::dsp::WindowSpec window_for(const oep::io::RunConfig& c, oep::LabelSpace space) {
  return space == oep::LabelSpace::Stage1 ? c.cascade.stage1_window : c.cascade.stage2_window;
}

void report(const oep::hierarchy::PredictionTimeline& pred, const oep::hierarchy::PredictionTimeline& truth,
            const oep::io::RunConfig& c, char** json, char** csv) {
  const auto r = oep::eval::evaluate_timelines(truth, pred, window_for(c, pred.space), c.iou_thresholds, c.transitions);
  put(json, oep::io::to_json(r).dump(2) + "\n");
  put(csv, oep::io::report_csv(r));
}

}  // namespace

extern "C" {

const char* oep_status_name(oep_status status) {
  switch (status) {
    case OEP_OK: return "ok";
    case OEP_ERR_PARAMETER: return "parameter";
    case OEP_ERR_DATA: return "data";
    case OEP_ERR_RANGE: return "range";
    case OEP_ERR_TRAINING: return "training";
    case OEP_ERR_CONFIG: return "config";
    case OEP_ERR_IO: return "io";
    case OEP_ERR_VERSION: return "version";
    case OEP_ERR_INTEGRITY: return "integrity";
    case OEP_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* oep_last_error(void) { return last_error.c_str(); }

void oep_string_free(char* s) { std::free(s); }

oep_status oep_config_resolve(const char* config_json, char** resolved_json) {
  return guarded([&] { put(resolved_json, oep::io::to_json(config_of(config_json)).dump(2) + "\n"); });
}

oep_status oep_session_synthesize(uint64_t seed, const char* subject_id, int hard, int home, double sample_rate_hz,
                                  oep_session** out) {
  return guarded([&] {
    require(out, "out");
    oep::synthgen::ScriptOptions o;
    o.separability = hard ? oep::synthgen::Separability::Hard : oep::synthgen::Separability::Easy;
    o.dataset = home ? oep::DatasetId::Home : oep::DatasetId::Lab;
    if (subject_id) o.subject_id = subject_id;
    auto s = std::make_unique<oep_session>();
    s->value = oep::synthgen::generate(oep::synthgen::program_script(seed, o), sample_rate_hz);
    *out = s.release();
  });
}

oep_status oep_session_load(const char* dir, oep_session** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    auto s = std::make_unique<oep_session>();
    s->value = oep::io::load_session(oep::io::SessionPaths::in(dir));
    *out = s.release();
  });
}

oep_status oep_session_save(const oep_session* session, const char* dir) {
  return guarded([&] {
    require(session, "session");
    require(dir, "dir");
    oep::io::save_session(session->value, dir);
  });
}

const char* oep_session_id(const oep_session* session) {
  return session ? session->value.subject.subject_id.c_str() : "";
}

void oep_session_free(oep_session* session) { delete session; }

oep_status oep_features_csv(const oep_session* session, const char* config_json, int stage, char** csv) {
  return guarded([&] {
    require(session, "session");
    if (stage != 1 && stage != 2) oep::fail(oep::ErrorCategory::Parameter, "stage must be 1 or 2");
    const auto c = config_of(config_json);
    const auto w = oep::hierarchy::extract_windows(session->value, c.cascade);
    put(csv, oep::io::features_csv(w, stage == 1 ? oep::features::Stage::Stage1 : oep::features::Stage::Stage2));
  });
}

oep_status oep_train(const oep_session* const* sessions, size_t n_sessions, const char* config_json, oep_bundle** out,
                     char** summary_json) {
  return guarded([&] {
    require(out, "out");
    const auto c = config_of(config_json);
    const auto windows = windows_of(sessions, n_sessions, c.cascade, c.jobs);
    auto trained = oep::cv::train_bundle(windows, c.cascade, c.kind, c.seed, c.jobs);
    nlohmann::ordered_json j;
    j["model"] = oep::models::kind_name(c.kind);
    j["subjects"] = nlohmann::ordered_json::array();
    for (const auto& w : windows) j["subjects"].push_back(w.subject_id);
    for (const auto& rs : trained.roles) {
      nlohmann::ordered_json r;
      r["hyperparameters"] = oep::models::describe(c.kind, rs.selection.chosen);
      r["selection_mean_weighted_f1"] = rs.selection.mean_f1;
      r["folds_used"] = rs.selection.inner_folds_used;
      j["roles"][oep::hierarchy::role_name(rs.role)] = std::move(r);
    }
    put(summary_json, j.dump(2) + "\n");
    auto b = std::make_unique<oep_bundle>();
    b->value = std::move(trained.bundle);
    *out = b.release();
  });
}

oep_status oep_bundle_save(const oep_bundle* bundle, const char* path) {
  return guarded([&] {
    require(bundle, "bundle");
    require(path, "path");
    oep::io::save_bundle(bundle->value, path);
  });
}

oep_status oep_bundle_load(const char* path, oep_bundle** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto b = std::make_unique<oep_bundle>();
    b->value = oep::io::load_bundle(path);
    *out = b.release();
  });
}

void oep_bundle_free(oep_bundle* bundle) { delete bundle; }

oep_status oep_predict(const oep_session* session, const oep_bundle* bundle, oep_timeline** stage1,
                       oep_timeline** activity, int* stage2_skipped) {
  return guarded([&] {
    require(session, "session");
    require(bundle, "bundle");
    auto r = oep::hierarchy::run_pipeline(session->value, bundle->value);
    auto t1 = std::make_unique<oep_timeline>();
    auto t2 = std::make_unique<oep_timeline>();
    t1->value = std::move(r.stage1.timeline);
    t2->value = std::move(r.stage2.timeline);
    if (stage2_skipped) *stage2_skipped = r.stage2_skipped ? 1 : 0;
    if (stage1) *stage1 = t1.release();
    if (activity) *activity = t2.release();
  });
}

oep_status oep_timeline_save(const oep_timeline* timeline, const char* path) {
  return guarded([&] {
    require(timeline, "timeline");
    require(path, "path");
    oep::io::write_atomic(path, oep::io::format_timeline(timeline->value));
  });
}

oep_status oep_timeline_load(const char* path, oep_timeline** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto t = std::make_unique<oep_timeline>();
    t->value = oep::io::parse_timeline(oep::io::read_file(path), path);
    *out = t.release();
  });
}

void oep_timeline_free(oep_timeline* timeline) { delete timeline; }

oep_status oep_evaluate(const oep_timeline* prediction, const char* annotations_path, const char* config_json,
                        char** report_json, char** report_csv) {
  return guarded([&] {
    require(prediction, "prediction");
    require(annotations_path, "annotations_path");
    const auto c = config_of(config_json);
    const auto intervals = oep::io::parse_annotations_csv(oep::io::read_file(annotations_path), annotations_path);
    const auto& p = prediction->value;
    const auto truth = oep::hierarchy::truth_timeline(intervals, p.labels.size(), p.sample_rate_hz, p.space);
    report(p, truth, c, report_json, report_csv);
  });
}

oep_status oep_evaluate_session(const oep_timeline* prediction, const oep_session* truth, const char* config_json,
                                char** report_json, char** report_csv) {
  return guarded([&] {
    require(prediction, "prediction");
    require(truth, "truth");
    const auto c = config_of(config_json);
    const auto& p = prediction->value;
    if (truth->value.recording.size() != p.labels.size())
      oep::fail(oep::ErrorCategory::Data, "timeline and session differ in length");
    report(p, oep::hierarchy::truth_timeline(truth->value, p.space), c, report_json, report_csv);
  });
}

oep_status oep_cv(const oep_session* const* sessions, size_t n_sessions, const char* config_json, int stage1_only,
                  char** result_json, char** summary_csv) {
  return guarded([&] {
    const auto c = config_of(config_json);
    const auto windows = windows_of(sessions, n_sessions, c.cascade, c.jobs);
    oep::cv::PipelineCvConfig pc;
    pc.cascade = c.cascade;
    pc.kind = c.kind;
    pc.policy = c.dataset_policy;
    pc.transitions = c.transitions;
    pc.thresholds = c.iou_thresholds;
    pc.seed = c.seed;
    pc.jobs = c.jobs;
    pc.stage1_only = stage1_only != 0;
    const auto r = oep::cv::pipeline_cv(windows, pc);
    put(result_json, oep::io::to_json(r, c.kind).dump(2) + "\n");
    put(summary_csv, oep::io::cv_summary_csv(r, c.kind));
  });
}

}  // extern "C"
