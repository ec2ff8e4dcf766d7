#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "oep/core.hpp"

namespace oep::dsp {

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;  // denominator 1 + a1 z^-1 + a2 z^-2
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  int order = 0;
  double cutoff_hz = 0;
  double sample_rate_hz = 0;

  std::complex<double> response(double freq_hz) const;
  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }
  // Poles of every section, two per section.
  std::vector<std::complex<double>> poles() const;
};

// Analog Butterworth prototype mapped by the bilinear transform, prewarped at
// the cutoff. Sections are ordered by ascending Q.
BiquadCascade design_butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz);

// Causal transposed direct-form II filtering from zero initial state.
std::vector<double> filter_signal(const BiquadCascade& cascade, std::span<const double> signal);

std::vector<double> magnitude_channel(std::span<const double> ax, std::span<const double> ay,
                                      std::span<const double> az);

// Keeps every factor-th sample starting at index 0.
std::vector<double> decimate(std::span<const double> signal, std::size_t factor);

struct WindowSpec {
  double length_s = 6.0;
  double overlap_fraction = 0.5;

  double stride_s() const { return length_s * (1.0 - overlap_fraction); }
  std::size_t length_samples(double fs) const;
  std::size_t stride_samples(double fs) const;
  void validate() const;
};

inline constexpr int kNumChannels = 7;
inline constexpr std::array<const char*, kNumChannels> kChannelNames = {"ax", "ay", "az", "gx", "gy", "gz", "aM"};

// Six low-pass filtered IMU channels plus the magnitude of the filtered
// accelerometer, for a whole recording.
struct ConditionedSignal {
  double sample_rate_hz = 0;
  std::array<std::vector<double>, kNumChannels> channels;

  std::size_t size() const { return channels[0].size(); }
};

ConditionedSignal condition(const ImuRecording& rec, const BiquadCascade& cascade);
// Default front-end: 6th-order, 10 Hz Butterworth.
ConditionedSignal condition(const ImuRecording& rec);

struct Segment {
  std::size_t start_sample = 0;
  std::size_t length_samples = 0;
  double sample_rate_hz = 0;
  std::array<std::vector<double>, kNumChannels> channels;
  std::string subject_id;

  double start_s() const { return static_cast<double>(start_sample) / sample_rate_hz; }
};

// Number of fully contained windows.
std::size_t window_count(std::size_t n_samples, std::size_t length, std::size_t stride);

std::vector<Segment> sliding_windows(const ConditionedSignal& signal, const WindowSpec& spec,
                                     const std::string& subject_id = {});
std::vector<Segment> sliding_windows(const AnnotatedSession& session, const WindowSpec& spec);

}  // namespace oep::dsp
