#pragma once

// Domain types shared by every stage of the recognition system: the activity
// taxonomy, raw IMU recordings, annotations and subject metadata.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oep/error.hpp"

namespace oep {

enum class Tier : std::uint8_t { Adl, Transition, Oep };

// Merged 15-class exercise taxonomy (level 2), in program order.
enum class Level2 : std::uint8_t {
  Marching,
  BackwardsWalking,
  ForwardsWalking,
  WalkingAndTurn,
  SidewaysWalking,
  StairsWalking,
  BackMobilizer,
  AnklePlantarflexors,
  AnkleDorsiflexors,
  KneeBends,
  StaticStanding,
  TrunkMobilizer,
  AbdominalMuscles,
  SitToStand,
  Sitting,
};
inline constexpr int kNumLevel2 = 15;

// Six merged exercise groups plus the two non-exercise passthroughs.
enum class Level1 : std::uint8_t {
  GeneralWalking,
  GeneralStanding,
  TrunkMobilizer,
  AbdominalMuscles,
  SitToStand,
  Sitting,
  Adl,
  Transition,
};
inline constexpr int kNumLevel1Oep = 6;
inline constexpr int kNumLevel1 = 8;

class ActivityLabel {
 public:
  static constexpr ActivityLabel adl() { return ActivityLabel(kAdlCode); }
  static constexpr ActivityLabel transition() { return ActivityLabel(kTransitionCode); }
  static constexpr ActivityLabel exercise(Level2 l) { return ActivityLabel(static_cast<int>(l)); }
  // Dense code: 0..14 exercises, 15 ADL, 16 Transition.
  static ActivityLabel from_code(int code);

  constexpr Tier tier() const {
    return code_ == kAdlCode ? Tier::Adl : code_ == kTransitionCode ? Tier::Transition : Tier::Oep;
  }
  constexpr std::optional<Level2> level2() const {
    if (tier() != Tier::Oep) return std::nullopt;
    return static_cast<Level2>(code_);
  }
  constexpr int code() const { return code_; }

  friend constexpr bool operator==(ActivityLabel, ActivityLabel) = default;

  static constexpr int kAdlCode = 15;
  static constexpr int kTransitionCode = 16;
  static constexpr int kNumCodes = 17;

 private:
  constexpr explicit ActivityLabel(int code) : code_(code) {}
  int code_;
};

Level1 level1_of(ActivityLabel label);
Level1 level1_of(Level2 label);

std::string_view name(Level2 l);
std::string_view name(Level1 l);
std::string_view name(ActivityLabel l);
// Accepts the 17 names produced by name(ActivityLabel).
std::optional<ActivityLabel> parse_activity_label(std::string_view s);
const std::vector<std::string>& accepted_label_names();

// Label spaces used by windows and timelines. Codes inside a space are dense
// integers; -1 always means "unassigned / unlabeled".
enum class LabelSpace : std::uint8_t {
  Stage1,    // 0 = ADL, 1 = OEP
  Level1,    // Level1 enum values
  Activity,  // ActivityLabel codes (level 2 + ADL + Transition)
};
inline constexpr int kUnassigned = -1;
inline constexpr int kStage1Adl = 0;
inline constexpr int kStage1Oep = 1;

std::string label_name(LabelSpace space, int code);
int space_size(LabelSpace space);
// Projects an activity label into a coarser space. Transition belongs to the
// exercise session at stage 1 (the program spans first to last exercise).
int project(ActivityLabel label, LabelSpace space);

struct ImuRecording {
  double sample_rate_hz = 100.0;
  std::vector<double> accel_x, accel_y, accel_z;
  std::vector<double> gyro_x, gyro_y, gyro_z;

  std::size_t size() const { return accel_x.size(); }
  double duration_s() const { return static_cast<double>(size()) / sample_rate_hz; }
  std::array<const std::vector<double>*, 6> channels() const {
    return {&accel_x, &accel_y, &accel_z, &gyro_x, &gyro_y, &gyro_z};
  }
  // Throws Data on violated invariants.
  void validate() const;
};

struct LabelInterval {
  double start_s = 0;
  double end_s = 0;
  ActivityLabel label = ActivityLabel::adl();
};

enum class Gender : std::uint8_t { Female, Male };
enum class SarcopeniaStatus : std::uint8_t { None, PreSarcopenia, Sarcopenia };
enum class DatasetId : std::uint8_t { Lab, Home };

struct SubjectMeta {
  std::string subject_id;
  double age = 0;
  Gender gender = Gender::Female;
  double weight = 0;
  double height = 0;
  SarcopeniaStatus sarcopenia_status = SarcopeniaStatus::None;
  DatasetId dataset_id = DatasetId::Lab;

  void validate() const;
};

struct AnnotatedSession {
  ImuRecording recording;
  std::vector<LabelInterval> intervals;
  SubjectMeta subject;

  void validate() const;
};

struct WindowLabel {
  int label = kUnassigned;  // in the requested LabelSpace
  bool pure = false;
};

// Per-label coverage of [window_start_s, window_start_s + window_len_s) in the
// requested label space. `unlabeled_s` holds the uncovered remainder.
struct Coverage {
  std::vector<double> seconds;  // indexed by label code
  double unlabeled_s = 0;
};

Coverage coverage(const AnnotatedSession& session, double window_start_s, double window_len_s,
                  LabelSpace space = LabelSpace::Activity);

// Label covering the largest share of the window. Ties go to the label whose
// first interval inside the window starts earliest. Throws Range when the
// window is not inside the recording.
WindowLabel majority_label(const AnnotatedSession& session, double window_start_s, double window_len_s,
                           LabelSpace space = LabelSpace::Activity);

// First and last covered instants of exercise-tier intervals, if any.
std::optional<std::pair<double, double>> annotated_oep_span(const AnnotatedSession& session);

}  // namespace oep
