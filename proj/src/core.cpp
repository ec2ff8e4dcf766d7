#include "oep/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oep {

const char* category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::Parameter: return "parameter";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Range: return "range";
    case ErrorCategory::Training: return "training";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Version: return "version";
    case ErrorCategory::Integrity: return "integrity";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::string_view, kNumLevel2> kLevel2Names = {
    "Marching",        "BackwardsWalking", "ForwardsWalking",     "WalkingAndTurn",    "SidewaysWalking",
    "StairsWalking",   "BackMobilizer",    "AnklePlantarflexors", "AnkleDorsiflexors", "KneeBends",
    "StaticStanding",  "TrunkMobilizer",   "AbdominalMuscles",    "SitToStand",        "Sitting",
};

constexpr std::array<std::string_view, kNumLevel1> kLevel1Names = {
    "GeneralWalking", "GeneralStanding", "TrunkMobilizer", "AbdominalMuscles",
    "SitToStand",     "Sitting",         "ADL",            "Transition",
};

}  // namespace

ActivityLabel ActivityLabel::from_code(int code) {
  if (code < 0 || code >= kNumCodes) fail(ErrorCategory::Parameter, "activity label code out of range: " + std::to_string(code));
  return ActivityLabel(code);
}

Level1 level1_of(Level2 l) {
  switch (l) {
    case Level2::Marching:
    case Level2::BackwardsWalking:
    case Level2::ForwardsWalking:
    case Level2::WalkingAndTurn:
    case Level2::SidewaysWalking:
    case Level2::StairsWalking: return Level1::GeneralWalking;
    case Level2::BackMobilizer:
    case Level2::AnklePlantarflexors:
    case Level2::AnkleDorsiflexors:
    case Level2::KneeBends:
    case Level2::StaticStanding: return Level1::GeneralStanding;
    case Level2::TrunkMobilizer: return Level1::TrunkMobilizer;
    case Level2::AbdominalMuscles: return Level1::AbdominalMuscles;
    case Level2::SitToStand: return Level1::SitToStand;
    case Level2::Sitting: return Level1::Sitting;
  }
  return Level1::Transition;  // unreachable
}

Level1 level1_of(ActivityLabel label) {
  switch (label.tier()) {
    case Tier::Adl: return Level1::Adl;
    case Tier::Transition: return Level1::Transition;
    case Tier::Oep: return level1_of(*label.level2());
  }
  return Level1::Transition;
}

std::string_view name(Level2 l) { return kLevel2Names[static_cast<int>(l)]; }
std::string_view name(Level1 l) { return kLevel1Names[static_cast<int>(l)]; }

std::string_view name(ActivityLabel l) {
  switch (l.tier()) {
    case Tier::Adl: return "ADL";
    case Tier::Transition: return "Transition";
    case Tier::Oep: return name(*l.level2());
  }
  return "";
}

const std::vector<std::string>& accepted_label_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (int c = 0; c < ActivityLabel::kNumCodes; ++c) v.emplace_back(name(ActivityLabel::from_code(c)));
    return v;
  }();
  return names;
}

std::optional<ActivityLabel> parse_activity_label(std::string_view s) {
  const auto& names = accepted_label_names();
  for (int c = 0; c < static_cast<int>(names.size()); ++c)
    if (names[c] == s) return ActivityLabel::from_code(c);
  return std::nullopt;
}

int space_size(LabelSpace space) {
  switch (space) {
    case LabelSpace::Stage1: return 2;
    case LabelSpace::Level1: return kNumLevel1;
    case LabelSpace::Activity: return ActivityLabel::kNumCodes;
  }
  return 0;
}

std::string label_name(LabelSpace space, int code) {
  if (code == kUnassigned) return "unassigned";
  if (code < 0 || code >= space_size(space)) return "invalid(" + std::to_string(code) + ")";
  switch (space) {
    case LabelSpace::Stage1: return code == kStage1Oep ? "OEP" : "ADL";
    case LabelSpace::Level1: return std::string(name(static_cast<Level1>(code)));
    case LabelSpace::Activity: return std::string(name(ActivityLabel::from_code(code)));
  }
  return {};
}

int project(ActivityLabel label, LabelSpace space) {
  switch (space) {
    case LabelSpace::Stage1: return label.tier() == Tier::Adl ? kStage1Adl : kStage1Oep;
    case LabelSpace::Level1: return static_cast<int>(level1_of(label));
    case LabelSpace::Activity: return label.code();
  }
  return kUnassigned;
}

void ImuRecording::validate() const {
  if (!(sample_rate_hz > 0) || !std::isfinite(sample_rate_hz))
    fail(ErrorCategory::Data, "sample rate must be positive");
  const auto n = accel_x.size();
  if (n == 0) fail(ErrorCategory::Data, "recording is empty");
  for (const auto* ch : channels()) {
    if (ch->size() != n) fail(ErrorCategory::Data, "IMU channels have different lengths");
    for (double v : *ch)
      if (!std::isfinite(v)) fail(ErrorCategory::Data, "recording contains non-finite samples");
  }
}

void SubjectMeta::validate() const {
  if (!(age > 0) || !(weight > 0) || !(height > 0))
    fail(ErrorCategory::Data, "subject '" + subject_id + "': age, weight and height must be positive");
}

void AnnotatedSession::validate() const {
  recording.validate();
  subject.validate();
  const double duration = recording.duration_s();
  const double eps = 1e-9 * std::max(1.0, duration);
  double prev_end = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (!(iv.start_s >= 0) || !(iv.start_s < iv.end_s) || iv.end_s > duration + eps)
      fail(ErrorCategory::Data, "interval " + std::to_string(i) + " is outside the recording or empty");
    if (iv.start_s < prev_end - eps)
      fail(ErrorCategory::Data, "interval " + std::to_string(i) + " overlaps or is out of order");
    prev_end = iv.end_s;
  }
}

Coverage coverage(const AnnotatedSession& session, double window_start_s, double window_len_s, LabelSpace space) {
  const double duration = session.recording.duration_s();
  const double eps = 1e-9 * std::max(1.0, duration);
  if (!(window_len_s > 0) || window_start_s < -eps || window_start_s + window_len_s > duration + eps)
    fail(ErrorCategory::Range, "window lies outside the recording");
  Coverage cov;
  cov.seconds.assign(space_size(space), 0.0);
  const double w0 = window_start_s;
  const double w1 = window_start_s + window_len_s;
  double covered = 0;
  for (const auto& iv : session.intervals) {
    if (iv.end_s <= w0) continue;
    if (iv.start_s >= w1) break;
    const double overlap = std::min(w1, iv.end_s) - std::max(w0, iv.start_s);
    if (overlap <= 0) continue;
    cov.seconds[project(iv.label, space)] += overlap;
    covered += overlap;
  }
  cov.unlabeled_s = std::max(0.0, window_len_s - covered);
  return cov;
}

WindowLabel majority_label(const AnnotatedSession& session, double window_start_s, double window_len_s,
                           LabelSpace space) {
  const Coverage cov = coverage(session, window_start_s, window_len_s, space);
  const double w0 = window_start_s;
  const double w1 = window_start_s + window_len_s;

  // Earliest interval start per label, for tie-breaking.
  std::vector<double> first_start(cov.seconds.size(), std::numeric_limits<double>::infinity());
  for (const auto& iv : session.intervals) {
    if (iv.end_s <= w0) continue;
    if (iv.start_s >= w1) break;
    auto& fs = first_start[project(iv.label, space)];
    fs = std::min(fs, iv.start_s);
  }

  WindowLabel out;
  double best = 0;
  for (int c = 0; c < static_cast<int>(cov.seconds.size()); ++c) {
    const double s = cov.seconds[c];
    if (s <= 0) continue;
    if (out.label == kUnassigned || s > best || (s == best && first_start[c] < first_start[out.label])) {
      out.label = c;
      best = s;
    }
  }
  if (out.label != kUnassigned) {
    const double eps = 1e-9 * std::max(1.0, window_len_s);
    out.pure = best >= window_len_s - eps;
  }
  return out;
}

std::optional<std::pair<double, double>> annotated_oep_span(const AnnotatedSession& session) {
  std::optional<std::pair<double, double>> span;
  for (const auto& iv : session.intervals) {
    if (iv.label.tier() != Tier::Oep) continue;
    if (!span) span = std::make_pair(iv.start_s, iv.end_s);
    span->first = std::min(span->first, iv.start_s);
    span->second = std::max(span->second, iv.end_s);
  }
  return span;
}

}  // namespace oep
