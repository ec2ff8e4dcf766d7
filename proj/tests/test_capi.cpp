#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oep/oep.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  oep_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("oep_capi_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("status names and error reporting") {
  CHECK(std::string(oep_status_name(OEP_OK)) == "ok");
  CHECK(std::string(oep_status_name(OEP_ERR_INTEGRITY)) == "integrity");
  CHECK(std::string(oep_status_name(OEP_ERR_VERSION)) == "version");
  CHECK(std::string(oep_status_name(static_cast<oep_status>(42))) == "internal");

  oep_session* s = nullptr;
  CHECK(oep_session_load(nullptr, &s) == OEP_ERR_PARAMETER);
  CHECK(std::string(oep_last_error()).find("null") != std::string::npos);
  CHECK(oep_session_load("/nonexistent/oep", &s) == OEP_ERR_IO);
  CHECK(s == nullptr);
  CHECK(oep_session_synthesize(1, "X", 0, 0, 0.0, &s) == OEP_ERR_PARAMETER);

  char* out = nullptr;
  CHECK(oep_config_resolve(R"({"unknown":1})", &out) == OEP_ERR_CONFIG);
  CHECK(out == nullptr);
  REQUIRE(oep_config_resolve(nullptr, &out) == OEP_OK);
  CHECK(std::string(oep_last_error()).empty());
  const auto cfg = json::parse(take(out));
  CHECK(cfg["model"] == "random_forest");
  CHECK(cfg["stage1_window_s"] == 600.0);
  CHECK(cfg["stage2_window_s"] == 6.0);
}

TEST_CASE("bundle files are checked on load") {
  const auto dir = scratch("bundle");
  std::ofstream(dir / "junk.oep") << "not a bundle\n";
  std::ofstream(dir / "future.oep") << "oep-bundle 9.0\nchecksum 0\ncascade\n";
  oep_bundle* b = nullptr;
  CHECK(oep_bundle_load((dir / "junk.oep").c_str(), &b) == OEP_ERR_INTEGRITY);
  CHECK(oep_bundle_load((dir / "future.oep").c_str(), &b) == OEP_ERR_VERSION);
  CHECK(oep_bundle_load((dir / "missing.oep").c_str(), &b) == OEP_ERR_IO);
  CHECK(b == nullptr);
  fs::remove_all(dir);
}

TEST_CASE("train, save, reload, predict and evaluate") {
  const auto dir = scratch("flow");
  oep_session* raw[3] = {};
  for (int i = 0; i < 3; ++i) {
    const std::string id = "C" + std::to_string(i);
    REQUIRE(oep_session_synthesize(200 + static_cast<std::uint64_t>(i), id.c_str(), 0, 0, 25.0, &raw[i]) == OEP_OK);
    CHECK(std::string(oep_session_id(raw[i])) == id);
  }
  REQUIRE(oep_session_save(raw[2], (dir / "C2").c_str()) == OEP_OK);
  oep_session* loaded = nullptr;
  REQUIRE(oep_session_load((dir / "C2").c_str(), &loaded) == OEP_OK);

  char* features = nullptr;
  REQUIRE(oep_features_csv(loaded, nullptr, 1, &features) == OEP_OK);
  const auto fcsv = take(features);
  CHECK(fcsv.find('\n') != std::string::npos);
  CHECK(oep_features_csv(loaded, nullptr, 3, &features) == OEP_ERR_PARAMETER);

  const char* cfg = R"({"seed":5})";
  const oep_session* train_set[2] = {raw[0], raw[1]};
  oep_bundle* bundle = nullptr;
  char* summary = nullptr;
  REQUIRE(oep_train(train_set, 2, cfg, &bundle, &summary) == OEP_OK);
  const auto sj = json::parse(take(summary));
  CHECK(sj["subjects"] == json::array({"C0", "C1"}));
  CHECK(sj["roles"].contains("stage1"));
  CHECK(sj["roles"].contains("walking"));

  const auto bpath = (dir / "m.oep").string();
  REQUIRE(oep_bundle_save(bundle, bpath.c_str()) == OEP_OK);
  oep_bundle* reloaded = nullptr;
  REQUIRE(oep_bundle_load(bpath.c_str(), &reloaded) == OEP_OK);

  oep_timeline *s1a = nullptr, *acta = nullptr, *s1b = nullptr, *actb = nullptr;
  int skipped = -1;
  REQUIRE(oep_predict(loaded, bundle, &s1a, &acta, &skipped) == OEP_OK);
  CHECK(skipped == 0);
  REQUIRE(oep_predict(loaded, reloaded, &s1b, &actb, nullptr) == OEP_OK);
  REQUIRE(oep_timeline_save(acta, (dir / "a.tl").c_str()) == OEP_OK);
  REQUIRE(oep_timeline_save(actb, (dir / "b.tl").c_str()) == OEP_OK);
  CHECK(slurp(dir / "a.tl") == slurp(dir / "b.tl"));

  oep_timeline* back = nullptr;
  REQUIRE(oep_timeline_load((dir / "a.tl").c_str(), &back) == OEP_OK);
  char *rj = nullptr, *rc = nullptr;
  REQUIRE(oep_evaluate(back, (dir / "C2" / "annotations.csv").c_str(), nullptr, &rj, &rc) == OEP_OK);
  const auto report = json::parse(take(rj));
  CHECK(take(rc).rfind("kind,threshold", 0) == 0);
  CHECK(report["weighted_f1"].get<double>() > 0.8);
  char* rj2 = nullptr;
  REQUIRE(oep_evaluate_session(acta, loaded, nullptr, &rj2, nullptr) == OEP_OK);
  CHECK(json::parse(take(rj2)) == report);
  CHECK(oep_evaluate_session(acta, raw[0], nullptr, &rj2, nullptr) == OEP_ERR_DATA);

  for (auto* t : {s1a, acta, s1b, actb, back}) oep_timeline_free(t);
  oep_bundle_free(bundle);
  oep_bundle_free(reloaded);
  oep_session_free(loaded);
  for (auto* s : raw) oep_session_free(s);
  oep_timeline_free(nullptr);
  oep_session_free(nullptr);
  fs::remove_all(dir);
}

}
