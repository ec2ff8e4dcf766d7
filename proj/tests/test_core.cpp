#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "oep/core.hpp"

using namespace oep;
using testutil::category_of;
using testutil::interval;

TEST_SUITE("core") {

TEST_CASE("level1 mapping of the taxonomy table") {
  CHECK(level1_of(Level2::Marching) == Level1::GeneralWalking);
  CHECK(level1_of(Level2::KneeBends) == Level1::GeneralStanding);
  CHECK(level1_of(Level2::SitToStand) == Level1::SitToStand);

  const Level2 walking[] = {Level2::Marching,       Level2::BackwardsWalking, Level2::ForwardsWalking,
                            Level2::WalkingAndTurn, Level2::SidewaysWalking,  Level2::StairsWalking};
  const Level2 standing[] = {Level2::BackMobilizer, Level2::AnklePlantarflexors, Level2::AnkleDorsiflexors,
                             Level2::KneeBends, Level2::StaticStanding};
  for (auto l : walking) CHECK(level1_of(l) == Level1::GeneralWalking);
  for (auto l : standing) CHECK(level1_of(l) == Level1::GeneralStanding);
  CHECK(level1_of(Level2::TrunkMobilizer) == Level1::TrunkMobilizer);
  CHECK(level1_of(Level2::AbdominalMuscles) == Level1::AbdominalMuscles);
  CHECK(level1_of(Level2::Sitting) == Level1::Sitting);
  CHECK(level1_of(ActivityLabel::adl()) == Level1::Adl);
  CHECK(level1_of(ActivityLabel::transition()) == Level1::Transition);
}

TEST_CASE("level1 is total and surjective with six exercise groups") {
  std::set<Level1> all, oep;
  int level2 = 0;
  for (int c = 0; c < ActivityLabel::kNumCodes; ++c) {
    const auto l = ActivityLabel::from_code(c);
    all.insert(level1_of(l));
    if (l.tier() == Tier::Oep) {
      ++level2;
      oep.insert(level1_of(l));
      CHECK(l.level2().has_value());
    } else {
      CHECK_FALSE(l.level2().has_value());
    }
  }
  CHECK(all.size() == 8);
  CHECK(oep.size() == 6);
  CHECK(level2 == 15);
  CHECK(category_of([] { ActivityLabel::from_code(17); }) == ErrorCategory::Parameter);
}

TEST_CASE("label names round-trip") {
  CHECK(accepted_label_names().size() == 17);
  for (int c = 0; c < ActivityLabel::kNumCodes; ++c) {
    const auto l = ActivityLabel::from_code(c);
    auto parsed = parse_activity_label(name(l));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == l);
  }
  CHECK_FALSE(parse_activity_label("Jogging").has_value());
}

TEST_CASE("projection into coarser spaces") {
  CHECK(project(ActivityLabel::adl(), LabelSpace::Stage1) == kStage1Adl);
  CHECK(project(ActivityLabel::transition(), LabelSpace::Stage1) == kStage1Oep);
  CHECK(project(ActivityLabel::exercise(Level2::Sitting), LabelSpace::Stage1) == kStage1Oep);
  CHECK(project(ActivityLabel::exercise(Level2::KneeBends), LabelSpace::Level1) ==
        static_cast<int>(Level1::GeneralStanding));
  CHECK(project(ActivityLabel::exercise(Level2::KneeBends), LabelSpace::Activity) ==
        static_cast<int>(Level2::KneeBends));
  CHECK(space_size(LabelSpace::Stage1) == 2);
  CHECK(space_size(LabelSpace::Level1) == 8);
  CHECK(space_size(LabelSpace::Activity) == 17);
}

TEST_CASE("recording and session invariants") {
  auto r = testutil::flat_recording(10, 100);
  CHECK_NOTHROW(r.validate());
  CHECK(r.duration_s() == doctest::Approx(0.1));
  r.gyro_z.pop_back();
  CHECK(category_of([&] { r.validate(); }) == ErrorCategory::Data);
  auto nan = testutil::flat_recording(10, 100);
  nan.accel_y[3] = std::nan("");
  CHECK(category_of([&] { nan.validate(); }) == ErrorCategory::Data);
  CHECK(category_of([] { testutil::flat_recording(0, 100).validate(); }) == ErrorCategory::Data);

  auto s = testutil::session(1000, 100, {interval(0, 4, ActivityLabel::adl()), interval(3, 6, ActivityLabel::adl())});
  CHECK(category_of([&] { s.validate(); }) == ErrorCategory::Data);
  s.intervals = {interval(0, 11, ActivityLabel::adl())};
  CHECK(category_of([&] { s.validate(); }) == ErrorCategory::Data);
  s.intervals = {interval(0, 10, ActivityLabel::adl())};
  CHECK_NOTHROW(s.validate());

  auto m = testutil::subject();
  m.weight = 0;
  CHECK(category_of([&] { m.validate(); }) == ErrorCategory::Data);
}

TEST_CASE("majority label") {
  const auto marching = ActivityLabel::exercise(Level2::Marching);
  const auto sitting = ActivityLabel::exercise(Level2::Sitting);
  auto s = testutil::session(10000, 100,
                             {interval(0, 20, marching), interval(20, 26, sitting),
                              interval(26, 30, ActivityLabel::transition())});

  auto w = majority_label(s, 5, 6);
  CHECK(w.label == marching.code());
  CHECK(w.pure);

  // 6 s of sitting, 4 s of transition.
  w = majority_label(s, 20, 10);
  CHECK(w.label == sitting.code());
  CHECK_FALSE(w.pure);

  w = majority_label(s, 40, 10);
  CHECK(w.label == kUnassigned);
  CHECK_FALSE(w.pure);

  CHECK(category_of([&] { majority_label(s, 95, 10); }) == ErrorCategory::Range);
  CHECK(category_of([&] { majority_label(s, -1, 10); }) == ErrorCategory::Range);

  // Equal shares go to the earlier interval.
  w = majority_label(s, 17, 6);
  CHECK(w.label == marching.code());
  // Stage-1 projection merges exercise and transition.
  w = majority_label(s, 10, 20, LabelSpace::Stage1);
  CHECK(w.label == kStage1Oep);
  CHECK(w.pure);
}

TEST_CASE("coverage shares sum to the window length") {
  oep::Rng rng(11);
  std::vector<LabelInterval> iv;
  double t = 0;
  while (t < 90) {
    const double gap = rng.uniform(0, 2);
    const double len = rng.uniform(0.5, 8);
    if (t + gap + len > 100) break;
    iv.push_back(interval(t + gap, t + gap + len, ActivityLabel::from_code(static_cast<int>(rng.below(17)))));
    t += gap + len;
  }
  auto s = testutil::session(10000, 100, iv);
  REQUIRE_NOTHROW(s.validate());
  for (int trial = 0; trial < 500; ++trial) {
    const double len = rng.uniform(0.1, 30);
    const double start = rng.uniform(0, 100 - len);
    for (auto space : {LabelSpace::Stage1, LabelSpace::Level1, LabelSpace::Activity}) {
      const auto c = coverage(s, start, len, space);
      double sum = c.unlabeled_s;
      for (double v : c.seconds) sum += v;
      CHECK(std::abs(sum - len) <= 1e-9);
    }
  }
}

TEST_CASE("annotated exercise span") {
  auto s = testutil::session(10000, 100,
                             {interval(0, 10, ActivityLabel::adl()),
                              interval(12, 20, ActivityLabel::exercise(Level2::Marching)),
                              interval(20, 22, ActivityLabel::transition()),
                              interval(22, 30, ActivityLabel::exercise(Level2::Sitting)),
                              interval(30, 50, ActivityLabel::adl())});
  auto span = annotated_oep_span(s);
  REQUIRE(span.has_value());
  CHECK(span->first == 12);
  CHECK(span->second == 30);
  s.intervals = {interval(0, 10, ActivityLabel::adl())};
  CHECK_FALSE(annotated_oep_span(s).has_value());
}

}
