#include "oep/synthgen.hpp"

#include <cmath>
#include <numbers>

#include "oep/random.hpp"

namespace oep::synthgen {

void ActivityProfile::validate(double fs) const {
  if (!(frequency_hz > 0) || !(frequency_hz < fs / 2))
    fail(ErrorCategory::Parameter, "profile frequency must lie in (0, Nyquist)");
  if (!(min_duration_s > 0) || max_duration_s < min_duration_s)
    fail(ErrorCategory::Parameter, "profile duration range must be positive and ordered");
  if (!(noise_std >= 0)) fail(ErrorCategory::Parameter, "noise std must be non-negative");
}

std::vector<ActivityProfile> default_profiles(Separability s) {
  const bool easy = s == Separability::Easy;
  std::vector<ActivityProfile> out;
  for (int code = 0; code < ActivityLabel::kNumCodes; ++code) {
    ActivityProfile p;
    p.label = ActivityLabel::from_code(code);
    p.noise_std = easy ? 0.02 : 0.35;
    switch (p.label.tier()) {
      case Tier::Adl:
        p.frequency_hz = easy ? 0.6 : 1.6;
        p.amplitude.fill(0.9);
        p.offset.fill(0.9);
        p.min_duration_s = 1200;
        p.max_duration_s = 2400;
        break;
      case Tier::Transition:
        p.frequency_hz = easy ? 1.1 : 1.6;
        p.amplitude.fill(0.9);
        p.offset.fill(0.9);
        p.min_duration_s = 10;
        p.max_duration_s = 60;
        break;
      case Tier::Oep: {
        // Hard profiles pair up exercises on one frequency and shrink the
        // amplitude and offset spread.
        // Program order does not follow frequency, so the first and last
        // exercises sit mid-band.
        static constexpr int kRank[kNumLevel2] = {7, 3, 11, 1, 13, 5, 9, 0, 14, 2, 12, 4, 10, 6, 8};
        const int rank = kRank[code];
        p.frequency_hz = easy ? 1.6 + 0.5 * rank : 1.6 + 0.5 * (rank / 2);
        const double spread = easy ? 1.0 : 0.15;
        for (int k = 0; k < 6; ++k) {
          p.amplitude[static_cast<std::size_t>(k)] = 0.6 + spread * 0.1 * ((rank * (k + 1) + k) % 7);
          p.offset[static_cast<std::size_t>(k)] = 0.5 + spread * 0.08 * ((rank * (k + 2) + 3 * k) % 11);
        }
        p.min_duration_s = 90;
        p.max_duration_s = 134;
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

double SessionScript::duration_s() const {
  double t = 0;
  for (const auto& b : blocks) t += b.duration_s;
  return t;
}

AnnotatedSession generate(const SessionScript& script, double fs) {
  if (!(fs > 0)) fail(ErrorCategory::Parameter, "sample rate must be positive");
  if (script.blocks.empty()) fail(ErrorCategory::Parameter, "script has no blocks");
  AnnotatedSession session;
  session.subject = script.subject;
  auto& rec = session.recording;
  rec.sample_rate_hz = fs;
  const auto n = static_cast<std::size_t>(std::ceil(script.duration_s() * fs - 1e-9));
  std::array<std::vector<double>*, 6> ch{&rec.accel_x, &rec.accel_y, &rec.accel_z,
                                         &rec.gyro_x,  &rec.gyro_y,  &rec.gyro_z};
  for (auto* c : ch) c->reserve(n);

  double t0 = 0;
  for (std::size_t b = 0; b < script.blocks.size(); ++b) {
    const auto& block = script.blocks[b];
    if (!(block.duration_s > 0))
      fail(ErrorCategory::Parameter, "script block " + std::to_string(b) + " has non-positive duration");
    block.profile.validate(fs);
    const double t1 = t0 + block.duration_s;
    session.intervals.push_back({t0, t1, block.profile.label});
    const auto s0 = static_cast<std::size_t>(std::ceil(t0 * fs - 1e-9));
    const auto s1 = b + 1 == script.blocks.size() ? n : static_cast<std::size_t>(std::ceil(t1 * fs - 1e-9));
    Rng rng(derive_seed(script.seed, 0x5E55, b));
    std::array<double, 6> phase{};
    for (auto& ph : phase) ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto& p = block.profile;
    const double w = 2.0 * std::numbers::pi * p.frequency_hz;
    for (std::size_t s = s0; s < s1; ++s) {
      const double t = static_cast<double>(s - s0) / fs;
      for (std::size_t k = 0; k < 6; ++k)
        ch[k]->push_back(p.amplitude[k] * std::sin(w * t + phase[k]) + p.noise_std * rng.normal() + p.offset[k]);
    }
    t0 = t1;
  }
  session.validate();
  return session;
}

SessionScript program_script(std::uint64_t seed, const ScriptOptions& options) {
  const auto profiles = default_profiles(options.separability);
  SessionScript script;
  script.seed = seed;
  Rng rng(derive_seed(seed, 0x5C21));

  auto& subj = script.subject;
  subj.subject_id = options.subject_id;
  subj.dataset_id = options.dataset;
  subj.age = options.dataset == DatasetId::Lab ? 84.09 + 5.28 * rng.normal() : 69.43 + 2.92 * rng.normal();
  subj.gender = rng.below(2) == 0 ? Gender::Female : Gender::Male;
  subj.sarcopenia_status = static_cast<SarcopeniaStatus>(rng.below(3));
  subj.height = rng.uniform(150, 185);
  subj.weight = rng.uniform(50, 90);

  const auto& adl = profiles[ActivityLabel::kAdlCode];
  const auto& transition = profiles[ActivityLabel::kTransitionCode];
  const bool easy = options.separability == Separability::Easy;
  // Daily life is a chain of short varied bouts spanning the exercises'
  // amplitude and offset ranges at lower frequencies.
  auto daily_life = [&](double total) {
    if (!(total > 0)) total = rng.uniform(adl.min_duration_s, adl.max_duration_s);
    while (total > 0) {
      ActivityProfile bout = adl;
      bout.frequency_hz = easy ? rng.uniform(0.3, 0.9) : rng.uniform(0.6, 3.0);
      for (std::size_t k = 0; k < 6; ++k) {
        bout.amplitude[k] = rng.uniform(0.75, 1.5);
        bout.offset[k] = rng.uniform(0.5, 1.38);
      }
      const double d = std::min(total, rng.uniform(options.adl_bout_min_s, options.adl_bout_max_s));
      script.blocks.push_back({bout, d});
      total -= d;
    }
  };
  daily_life(options.adl_before_s);
  for (int e = 0; e < kNumLevel2; ++e) {
    if (e > 0) script.blocks.push_back({transition, rng.uniform(transition.min_duration_s, transition.max_duration_s)});
    const auto& p = profiles[static_cast<std::size_t>(e)];
    script.blocks.push_back({p, rng.uniform(p.min_duration_s, p.max_duration_s)});
  }
  daily_life(options.adl_after_s);
  return script;
}

}  // namespace oep::synthgen
