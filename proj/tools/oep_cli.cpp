// Command-line front end over the C interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oep/oep.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Carries a library status out of a subcommand.
struct Failure {
  oep_status status;
  std::string message;
};

void check(oep_status s) {
  if (s != OEP_OK) throw Failure{s, oep_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) { throw Failure{OEP_ERR_PARAMETER, message}; }

struct StringDeleter {
  void operator()(char* s) const { oep_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct SessionDeleter {
  void operator()(oep_session* s) const { oep_session_free(s); }
};
struct BundleDeleter {
  void operator()(oep_bundle* b) const { oep_bundle_free(b); }
};
struct TimelineDeleter {
  void operator()(oep_timeline* t) const { oep_timeline_free(t); }
};
using Session = std::unique_ptr<oep_session, SessionDeleter>;
using Bundle = std::unique_ptr<oep_bundle, BundleDeleter>;
using Timeline = std::unique_ptr<oep_timeline, TimelineDeleter>;

std::string take(char* s) {
  OwnedString owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Failure{OEP_ERR_IO, "cannot write '" + path.string() + "'"};
  }
  fs::rename(tmp, path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") std::cout << text;
  else write_text(out_path, text);
}

struct Globals {
  std::string config_path;
  std::optional<long long> seed;
  std::optional<int> jobs;
  std::string iou_thresholds;
  std::string transitions;
};

// Configuration file plus command-line overrides, validated by the library.
std::string resolved_config(const Globals& g) {
  ordered_json j = ordered_json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw Failure{OEP_ERR_IO, "cannot read config '" + g.config_path + "'"};
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      j = ordered_json::parse(ss.str());
    } catch (const std::exception& e) {
      throw Failure{OEP_ERR_CONFIG, "config '" + g.config_path + "' is not valid JSON: " + e.what()};
    }
  }
  if (!j.is_object()) throw Failure{OEP_ERR_CONFIG, "config must be a JSON object"};
  if (g.seed) j["seed"] = *g.seed;
  if (g.jobs) j["jobs"] = *g.jobs;
  if (!g.transitions.empty()) j["transitions"] = g.transitions;
  if (!g.iou_thresholds.empty()) {
    ordered_json list = ordered_json::array();
    std::stringstream ss(g.iou_thresholds);
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        std::size_t used = 0;
        list.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        usage_error("--iou-thresholds expects numbers separated by commas, got '" + g.iou_thresholds + "'");
      }
    }
    j["iou_thresholds"] = list;
  }
  char* out = nullptr;
  check(oep_config_resolve(j.dump().c_str(), &out));
  return take(out);
}

std::uint64_t config_seed(const std::string& config) { return ordered_json::parse(config).at("seed").get<std::uint64_t>(); }

Session load_session(const fs::path& dir) {
  oep_session* s = nullptr;
  check(oep_session_load(dir.string().c_str(), &s));
  return Session(s);
}

std::vector<Session> load_sessions(const fs::path& root) {
  if (!fs::is_directory(root)) throw Failure{OEP_ERR_IO, "'" + root.string() + "' is not a directory"};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "signal.csv")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw Failure{OEP_ERR_DATA, "no session directories under '" + root.string() + "'"};
  std::vector<Session> out;
  for (const auto& d : dirs) out.push_back(load_session(d));
  return out;
}

std::vector<const oep_session*> raw(const std::vector<Session>& v) {
  std::vector<const oep_session*> out;
  for (const auto& s : v) out.push_back(s.get());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage exercise recognition from a single waist IMU"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every randomized step");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic annotated sessions");
  std::string synth_out;
  int n_subjects = 8, n_home = 0;
  double rate = 100.0;
  bool hard = false;
  synth->add_option("--out", synth_out, "Output directory (one subdirectory per subject)")->required();
  synth->add_option("--subjects", n_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  synth->add_option("--home", n_home, "How many of the subjects belong to the home dataset")->check(CLI::NonNegativeNumber);
  synth->add_option("--rate", rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  synth->add_flag("--hard", hard, "Overlapping activity profiles");

  // features
  auto* feat = app.add_subcommand("features", "Write the feature CSV of one session");
  std::string feat_session, feat_out;
  int feat_stage = 2;
  feat->add_option("--session", feat_session, "Session directory")->required();
  feat->add_option("--stage", feat_stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  feat->add_option("--out", feat_out, "Output CSV (stdout when omitted)");

  // train
  auto* train = app.add_subcommand("train", "Fit a model bundle on a directory of sessions");
  std::string train_sessions, train_out, train_summary;
  train->add_option("--sessions", train_sessions, "Directory of session directories")->required();
  train->add_option("--out", train_out, "Bundle file")->required();
  train->add_option("--summary", train_summary, "Training summary JSON (stdout when omitted)");

  // predict
  auto* predict = app.add_subcommand("predict", "Label one session with a trained bundle");
  std::string pred_session, pred_bundle, pred_out, pred_stage1_out;
  predict->add_option("--session", pred_session, "Session directory")->required();
  predict->add_option("--bundle", pred_bundle, "Bundle file")->required();
  predict->add_option("--out", pred_out, "Activity timeline file")->required();
  predict->add_option("--stage1-out", pred_stage1_out, "Stage-1 timeline file");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a timeline against annotations");
  std::string ev_timeline, ev_annotations, ev_json, ev_csv;
  evaluate->add_option("--timeline", ev_timeline, "Predicted timeline file")->required();
  evaluate->add_option("--annotations", ev_annotations, "Annotation CSV")->required();
  evaluate->add_option("--json", ev_json, "Report JSON (stdout when omitted)");
  evaluate->add_option("--csv", ev_csv, "Report CSV");
  evaluate->add_option("--iou-thresholds", g.iou_thresholds, "Comma-separated IoU thresholds, e.g. 0.5,0.75");
  evaluate->add_option("--transitions", g.transitions, "Transition windows: exclude or fp")
      ->check(CLI::IsMember({"exclude", "fp"}));

  // cv
  auto* cv = app.add_subcommand("cv", "Nested leave-one-subject-out evaluation");
  std::string cv_sessions, cv_out;
  bool cv_stage1_only = false;
  cv->add_option("--sessions", cv_sessions, "Directory of session directories")->required();
  cv->add_option("--out", cv_out, "Output directory")->required();
  cv->add_flag("--stage1-only", cv_stage1_only, "Evaluate stage 1 only");
  cv->add_option("--iou-thresholds", g.iou_thresholds, "Comma-separated IoU thresholds");
  cv->add_option("--transitions", g.transitions, "Transition windows: exclude or fp")
      ->check(CLI::IsMember({"exclude", "fp"}));

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Train on one directory, then predict and evaluate another");
  std::string pl_train, pl_test, pl_out;
  pipeline->add_option("--train", pl_train, "Training session directories")->required();
  pipeline->add_option("--test", pl_test, "Test session directories")->required();
  pipeline->add_option("--out", pl_out, "Output directory")->required();
  pipeline->add_option("--iou-thresholds", g.iou_thresholds, "Comma-separated IoU thresholds");
  pipeline->add_option("--transitions", g.transitions, "Transition windows: exclude or fp")
      ->check(CLI::IsMember({"exclude", "fp"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    std::cerr << ordered_json{{"error", oep_status_name(OEP_ERR_PARAMETER)}, {"message", e.what()}}.dump() << "\n";
    return OEP_ERR_PARAMETER;
  }

  try {
    const std::string config = resolved_config(g);
    const char* cfg = config.c_str();

    if (*synth) {
      if (n_home > n_subjects) usage_error("--home cannot exceed --subjects");
      const auto seed = config_seed(config);
      for (int i = 0; i < n_subjects; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "S%02d", i + 1);
        oep_session* s = nullptr;
        check(oep_session_synthesize(seed + static_cast<std::uint64_t>(i), id, hard ? 1 : 0,
                                     i >= n_subjects - n_home ? 1 : 0, rate, &s));
        Session owned(s);
        check(oep_session_save(owned.get(), (fs::path(synth_out) / id).string().c_str()));
      }
    } else if (*feat) {
      const auto s = load_session(feat_session);
      char* csv = nullptr;
      check(oep_features_csv(s.get(), cfg, feat_stage, &csv));
      emit(feat_out, take(csv));
    } else if (*train) {
      const auto sessions = load_sessions(train_sessions);
      const auto ptrs = raw(sessions);
      oep_bundle* b = nullptr;
      char* summary = nullptr;
      check(oep_train(ptrs.data(), ptrs.size(), cfg, &b, &summary));
      Bundle bundle(b);
      const auto text = take(summary);
      check(oep_bundle_save(bundle.get(), train_out.c_str()));
      emit(train_summary, text);
    } else if (*predict) {
      const auto s = load_session(pred_session);
      oep_bundle* b = nullptr;
      check(oep_bundle_load(pred_bundle.c_str(), &b));
      Bundle bundle(b);
      oep_timeline *t1 = nullptr, *t2 = nullptr;
      int skipped = 0;
      check(oep_predict(s.get(), bundle.get(), &t1, &t2, &skipped));
      Timeline stage1(t1), activity(t2);
      check(oep_timeline_save(activity.get(), pred_out.c_str()));
      if (!pred_stage1_out.empty()) check(oep_timeline_save(stage1.get(), pred_stage1_out.c_str()));
      if (skipped) std::cerr << "no exercise session detected; stage 2 skipped\n";
    } else if (*evaluate) {
      oep_timeline* t = nullptr;
      check(oep_timeline_load(ev_timeline.c_str(), &t));
      Timeline tl(t);
      char *json = nullptr, *csv = nullptr;
      check(oep_evaluate(tl.get(), ev_annotations.c_str(), cfg, &json, &csv));
      const auto json_text = take(json), csv_text = take(csv);
      emit(ev_json, json_text);
      if (!ev_csv.empty()) write_text(ev_csv, csv_text);
    } else if (*cv) {
      const auto sessions = load_sessions(cv_sessions);
      const auto ptrs = raw(sessions);
      char *json = nullptr, *csv = nullptr;
      check(oep_cv(ptrs.data(), ptrs.size(), cfg, cv_stage1_only ? 1 : 0, &json, &csv));
      const auto result = ordered_json::parse(take(json));
      const fs::path out(cv_out);
      for (const auto& fold : result.at("folds"))
        write_text(out / "folds" / (fold.at("test_subject").get<std::string>() + ".json"), fold.dump(2) + "\n");
      ordered_json aggregate;
      aggregate["model"] = result.at("model");
      aggregate["config"] = ordered_json::parse(config);
      aggregate["aggregate"] = result.at("aggregate");
      write_text(out / "aggregate.json", aggregate.dump(2) + "\n");
      write_text(out / "summary.csv", take(csv));
    } else if (*pipeline) {
      const auto train_set = load_sessions(pl_train);
      const auto test_set = load_sessions(pl_test);
      const auto ptrs = raw(train_set);
      oep_bundle* b = nullptr;
      char* summary = nullptr;
      check(oep_train(ptrs.data(), ptrs.size(), cfg, &b, &summary));
      Bundle bundle(b);
      const fs::path out(pl_out);
      write_text(out / "train_summary.json", take(summary));
      check(oep_bundle_save(bundle.get(), (out / "bundle.oep").string().c_str()));
      for (const auto& s : test_set) {
        const std::string id = oep_session_id(s.get());
        oep_timeline *t1 = nullptr, *t2 = nullptr;
        check(oep_predict(s.get(), bundle.get(), &t1, &t2, nullptr));
        Timeline stage1(t1), activity(t2);
        check(oep_timeline_save(stage1.get(), (out / (id + ".stage1.timeline")).string().c_str()));
        check(oep_timeline_save(activity.get(), (out / (id + ".timeline")).string().c_str()));
        for (const auto& [tl, suffix] : {std::pair{stage1.get(), ".stage1"}, std::pair{activity.get(), ""}}) {
          char *json = nullptr, *csv = nullptr;
          check(oep_evaluate_session(tl, s.get(), cfg, &json, &csv));
          write_text(out / (id + suffix + ".report.json"), take(json));
          write_text(out / (id + suffix + ".report.csv"), take(csv));
        }
      }
    }
  } catch (const Failure& f) {
    std::cerr << ordered_json{{"error", oep_status_name(f.status)}, {"message", f.message}}.dump() << "\n";
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::cerr << ordered_json{{"error", oep_status_name(OEP_ERR_IO)}, {"message", e.what()}}.dump() << "\n";
    return OEP_ERR_IO;
  }
  return 0;
}
