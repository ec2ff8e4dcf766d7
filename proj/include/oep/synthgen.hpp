#pragma once

// Synthetic labeled sessions: every activity block is a per-channel sinusoid
// with Gaussian noise and an offset, so spectral features are predictable.

#include <array>
#include <cstdint>
#include <vector>

#include "oep/core.hpp"

namespace oep::synthgen {

struct ActivityProfile {
  ActivityLabel label = ActivityLabel::adl();
  std::array<double, 6> amplitude{};  // ax ay az gx gy gz
  std::array<double, 6> offset{};
  double frequency_hz = 1.0;
  double noise_std = 0.0;
  double min_duration_s = 1.0;
  double max_duration_s = 1.0;

  void validate(double sample_rate_hz) const;
};

enum class Separability { Easy, Hard };

// 17 profiles indexed by activity code (15 exercises, ADL, Transition).
std::vector<ActivityProfile> default_profiles(Separability s);

struct ScriptBlock {
  ActivityProfile profile;
  double duration_s = 0;
};

struct SessionScript {
  std::vector<ScriptBlock> blocks;
  SubjectMeta subject;
  std::uint64_t seed = 0;

  double duration_s() const;
};

// Deterministic in (script, sample rate). Throws Parameter on a block with
// non-positive duration or an invalid profile.
AnnotatedSession generate(const SessionScript& script, double sample_rate_hz);

struct ScriptOptions {
  Separability separability = Separability::Easy;
  DatasetId dataset = DatasetId::Lab;
  // Daily-life flank lengths; <= 0 draws them from the ADL profile range.
  double adl_before_s = 0;
  double adl_after_s = 0;
  double adl_bout_min_s = 20;
  double adl_bout_max_s = 90;
  std::string subject_id = "S01";
};

// Daily life, then the 15 exercises in program order (marching first) with a
// transition between consecutive exercises, then daily life again. Daily life
// is split into short ADL bouts with jittered signal parameters.
SessionScript program_script(std::uint64_t seed, const ScriptOptions& options = {});

}  // namespace oep::synthgen
