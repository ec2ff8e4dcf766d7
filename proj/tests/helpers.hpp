#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "oep/core.hpp"
#include "oep/error.hpp"
#include "oep/random.hpp"

namespace testutil {

// Category of the oep::Error thrown by fn; fails the test when nothing is thrown.
inline oep::ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const oep::Error& e) {
    return e.category();
  }
  FAIL("expected an oep::Error");
  return oep::ErrorCategory::Parameter;
}

inline oep::ImuRecording flat_recording(std::size_t n, double fs, double value = 0.0) {
  oep::ImuRecording r;
  r.sample_rate_hz = fs;
  for (auto* ch : {&r.accel_x, &r.accel_y, &r.accel_z, &r.gyro_x, &r.gyro_y, &r.gyro_z}) ch->assign(n, value);
  return r;
}

inline oep::SubjectMeta subject(const std::string& id = "T1") {
  oep::SubjectMeta m;
  m.subject_id = id;
  m.age = 75;
  m.weight = 70;
  m.height = 170;
  return m;
}

inline oep::AnnotatedSession session(std::size_t n, double fs, std::vector<oep::LabelInterval> iv) {
  oep::AnnotatedSession s;
  s.recording = flat_recording(n, fs);
  s.intervals = std::move(iv);
  s.subject = subject();
  return s;
}

inline oep::LabelInterval interval(double a, double b, oep::ActivityLabel l) { return {a, b, l}; }

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
