#include "oep/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oep::dsp {

std::complex<double> BiquadCascade::response(double freq_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

std::vector<std::complex<double>> BiquadCascade::poles() const {
  std::vector<std::complex<double>> out;
  for (const auto& s : sections) {
    // z^2 + a1 z + a2 = 0
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

BiquadCascade design_butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  if (order < 2 || order % 2 != 0) fail(ErrorCategory::Parameter, "Butterworth order must be even and >= 2");
  if (!(sample_rate_hz > 0)) fail(ErrorCategory::Parameter, "sample rate must be positive");
  if (!(cutoff_hz > 0) || !(cutoff_hz < sample_rate_hz / 2))
    fail(ErrorCategory::Parameter, "cutoff must lie strictly between 0 and Nyquist");

  BiquadCascade c;
  c.order = order;
  c.cutoff_hz = cutoff_hz;
  c.sample_rate_hz = sample_rate_hz;

  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  const double k2 = k * k;
  const int pairs = order / 2;
  // Pole pair p has angle (2p+1)pi/(2n) from the imaginary axis; Q = 1/(2 sin).
  // Iterating p downward yields ascending Q.
  for (int p = pairs - 1; p >= 0; --p) {
    const double theta = std::numbers::pi * (2.0 * p + 1.0) / (2.0 * order);
    const double inv_q = 2.0 * std::sin(theta);
    const double norm = 1.0 / (1.0 + k * inv_q + k2);
    Biquad s;
    s.b0 = k2 * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k2 - 1.0) * norm;
    s.a2 = (1.0 - k * inv_q + k2) * norm;
    c.sections.push_back(s);
  }
  return c;
}

std::vector<double> filter_signal(const BiquadCascade& cascade, std::span<const double> signal) {
  for (double v : signal)
    if (!std::isfinite(v)) fail(ErrorCategory::Data, "cannot filter non-finite samples");
  std::vector<double> y(signal.begin(), signal.end());
  for (const auto& s : cascade.sections) {
    double z1 = 0, z2 = 0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> magnitude_channel(std::span<const double> ax, std::span<const double> ay,
                                      std::span<const double> az) {
  if (ax.size() != ay.size() || ax.size() != az.size())
    fail(ErrorCategory::Data, "accelerometer channels have different lengths");
  std::vector<double> m(ax.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::sqrt(ax[i] * ax[i] + ay[i] * ay[i] + az[i] * az[i]);
  return m;
}

std::vector<double> decimate(std::span<const double> signal, std::size_t factor) {
  if (factor == 0) fail(ErrorCategory::Parameter, "decimation factor must be >= 1");
  std::vector<double> out;
  out.reserve((signal.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < signal.size(); i += factor) out.push_back(signal[i]);
  return out;
}

void WindowSpec::validate() const {
  if (!(length_s > 0)) fail(ErrorCategory::Parameter, "window length must be positive");
  if (!(overlap_fraction >= 0) || !(overlap_fraction < 1))
    fail(ErrorCategory::Parameter, "window overlap must lie in [0, 1)");
}

std::size_t WindowSpec::length_samples(double fs) const {
  validate();
  const auto n = static_cast<std::size_t>(std::llround(length_s * fs));
  if (n == 0) fail(ErrorCategory::Parameter, "window shorter than one sample");
  return n;
}

std::size_t WindowSpec::stride_samples(double fs) const {
  validate();
  const auto n = static_cast<std::size_t>(std::llround(stride_s() * fs));
  if (n == 0) fail(ErrorCategory::Parameter, "window stride shorter than one sample");
  return n;
}

std::size_t window_count(std::size_t n_samples, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0 || n_samples < length) return 0;
  return (n_samples - length) / stride + 1;
}

ConditionedSignal condition(const ImuRecording& rec, const BiquadCascade& cascade) {
  rec.validate();
  ConditionedSignal out;
  out.sample_rate_hz = rec.sample_rate_hz;
  const auto raw = rec.channels();
  for (int c = 0; c < 6; ++c) out.channels[c] = filter_signal(cascade, *raw[c]);
  out.channels[6] = magnitude_channel(out.channels[0], out.channels[1], out.channels[2]);
  return out;
}

ConditionedSignal condition(const ImuRecording& rec) {
  return condition(rec, design_butterworth_lowpass(6, 10.0, rec.sample_rate_hz));
}

std::vector<Segment> sliding_windows(const ConditionedSignal& signal, const WindowSpec& spec,
                                     const std::string& subject_id) {
  const double fs = signal.sample_rate_hz;
  const std::size_t len = spec.length_samples(fs);
  const std::size_t stride = spec.stride_samples(fs);
  const std::size_t count = window_count(signal.size(), len, stride);
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Segment seg;
    seg.start_sample = w * stride;
    seg.length_samples = len;
    seg.sample_rate_hz = fs;
    seg.subject_id = subject_id;
    for (int c = 0; c < kNumChannels; ++c) {
      const auto& ch = signal.channels[c];
      seg.channels[c].assign(ch.begin() + static_cast<std::ptrdiff_t>(seg.start_sample),
                             ch.begin() + static_cast<std::ptrdiff_t>(seg.start_sample + len));
    }
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<Segment> sliding_windows(const AnnotatedSession& session, const WindowSpec& spec) {
  return sliding_windows(condition(session.recording), spec, session.subject.subject_id);
}

}  // namespace oep::dsp
