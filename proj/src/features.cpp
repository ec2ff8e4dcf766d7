#include "oep/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

namespace oep::features {

const std::array<const char*, kNumTimeFeatures> kTimeFeatureNames = {
    "interquartile_range", "kurtosis", "max",      "mean",        "median",
    "min",                 "rms",      "skewness", "std",         "variance",
    "absolute_energy",     "autocorrelation", "centroid", "entropy", "zero_crossing_rate",
};

const std::array<const char*, kNumFreqFeatures> kFreqFeatureNames = {
    "fft_mean_coefficient", "fundamental_frequency", "human_range_energy",
    "max_power_spectrum",   "maximum_frequency",     "median_frequency",
    "spectral_entropy",     "spectral_kurtosis",     "spectral_skewness",
};

const std::array<const char*, kNumMetaFeatures> kMetaFeatureNames = {"age", "gender", "weight", "height",
                                                                     "sarcopenia_status"};

namespace {

// Linear interpolation between order statistics (position q * (n - 1)).
double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + (s[hi] - s[lo]) * frac;
}

bool degenerate_spread(double var, double mean) {
  return std::sqrt(var) <= 1e-12 * std::max(1.0, std::abs(mean));
}

double shannon(std::span<const double> counts, double total) {
  double h = 0;
  for (double c : counts) {
    if (c <= 0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}

struct TwiddleTable {
  std::vector<std::complex<double>> w;  // exp(-2 pi i j / N), j < N/2
};

const TwiddleTable& twiddles(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, TwiddleTable> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  TwiddleTable t;
  t.w.resize(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j)
    t.w[j] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
  return cache.emplace(n, std::move(t)).first->second;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n).w;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + half] * tw[j * step];
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

}  // namespace

std::array<double, kNumTimeFeatures> time_features(std::span<const double> x, double fs) {
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCategory::Data, "time features need at least two samples");
  if (!(fs > 0)) fail(ErrorCategory::Parameter, "sample rate must be positive");

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double mn = sorted.front();
  const double mx = sorted.back();

  const double dn = static_cast<double>(n);
  double sum = 0, energy = 0;
  for (double v : x) {
    sum += v;
    energy += v * v;
  }
  const double mean = sum / dn;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= dn;
  m3 /= dn;
  m4 /= dn;
  const bool flat = degenerate_spread(m2, mean);
  const double sd = std::sqrt(m2);

  // Pearson correlation of x[0..n-2] against x[1..n-1].
  double autocorr = 0;
  {
    const std::size_t m = n - 1;
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < m; ++i) {
      sa += x[i];
      sb += x[i + 1];
    }
    const double ma = sa / static_cast<double>(m), mb = sb / static_cast<double>(m);
    double cab = 0, caa = 0, cbb = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double da = x[i] - ma, db = x[i + 1] - mb;
      cab += da * db;
      caa += da * da;
      cbb += db * db;
    }
    const double va = caa / static_cast<double>(m), vb = cbb / static_cast<double>(m);
    if (!flat && !degenerate_spread(va, ma) && !degenerate_spread(vb, mb)) autocorr = cab / std::sqrt(caa * cbb);
  }

  double centroid = 0;
  if (energy > 0) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += (static_cast<double>(i) / fs) * x[i] * x[i];
    centroid = acc / energy;
  }

  double entropy = 0;
  if (mx > mn) {
    std::array<double, 10> bins{};
    const double width = (mx - mn) / 10.0;
    for (double v : x) {
      auto b = static_cast<std::size_t>((v - mn) / width);
      bins[std::min<std::size_t>(b, 9)] += 1;
    }
    entropy = shannon(bins, dn);
  }

  std::size_t crossings = 0;
  for (std::size_t i = 1; i < n; ++i)
    if ((x[i - 1] >= 0) != (x[i] >= 0)) ++crossings;

  return {
      quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25),
      flat ? 0.0 : m4 / (m2 * m2),
      mx,
      mean,
      quantile_sorted(sorted, 0.5),
      mn,
      std::sqrt(energy / dn),
      flat ? 0.0 : m3 / (m2 * sd),
      sd,
      m2,
      energy,
      autocorr,
      centroid,
      entropy,
      static_cast<double>(crossings) / static_cast<double>(n - 1),
  };
}

std::size_t padded_length(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(n, 2)); }

std::vector<std::complex<double>> real_fft(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCategory::Data, "FFT needs at least two samples");
  const std::size_t n = padded_length(x.size());
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  fft_inplace(a);
  a.resize(n / 2 + 1);
  return a;
}

std::array<double, kNumFreqFeatures> freq_features(std::span<const double> x, double fs) {
  if (!(fs > 0)) fail(ErrorCategory::Parameter, "sample rate must be positive");
  const auto spec = real_fft(x);
  const std::size_t padded = padded_length(x.size());
  const std::size_t bins = spec.size() - 1;  // DC excluded
  std::vector<double> power(bins), freq(bins);
  double mag_sum = 0, total = 0;
  for (std::size_t k = 1; k <= bins; ++k) {
    const double mag = std::abs(spec[k]);
    mag_sum += mag;
    power[k - 1] = mag * mag;
    total += power[k - 1];
    freq[k - 1] = static_cast<double>(k) * fs / static_cast<double>(padded);
  }
  std::array<double, kNumFreqFeatures> out{};
  if (!(total > 0)) return out;

  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  double human = 0;
  for (std::size_t i = 0; i < bins; ++i)
    if (freq[i] >= 0.6 && freq[i] <= 2.5) human += power[i];

  auto cumulative_freq = [&](double share) {
    double acc = 0;
    for (std::size_t i = 0; i < bins; ++i) {
      acc += power[i];
      if (acc >= share * total) return freq[i];
    }
    return freq.back();
  };

  double mu = 0;
  for (std::size_t i = 0; i < bins; ++i) mu += power[i] / total * freq[i];
  double v2 = 0, v3 = 0, v4 = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double p = power[i] / total;
    const double d = freq[i] - mu;
    v2 += p * d * d;
    v3 += p * d * d * d;
    v4 += p * d * d * d * d;
  }
  const bool flat = degenerate_spread(v2, mu);

  out[0] = mag_sum / static_cast<double>(bins);
  out[1] = freq[peak];
  out[2] = human / total;
  out[3] = power[peak];
  out[4] = cumulative_freq(0.95);
  out[5] = cumulative_freq(0.5);
  out[6] = bins > 1 ? shannon(power, total) / std::log(static_cast<double>(bins)) : 0.0;
  out[7] = flat ? 0.0 : v4 / (v2 * v2);
  out[8] = flat ? 0.0 : v3 / (v2 * std::sqrt(v2));
  return out;
}

std::array<double, kNumMetaFeatures> meta_features(const SubjectMeta& s) {
  return {s.age, s.gender == Gender::Male ? 1.0 : 0.0, s.weight, s.height,
          static_cast<double>(static_cast<int>(s.sarcopenia_status))};
}

double relative_start_time(double segment_start_s, const OepInterval& oep) {
  if (!(oep.end_s > oep.start_s)) fail(ErrorCategory::Parameter, "OEP interval must have end after start");
  return (segment_start_s - oep.start_s) / (oep.end_s - oep.start_s);
}

const std::vector<std::string>& feature_names(Stage stage) {
  static const std::vector<std::string> stage1 = [] {
    std::vector<std::string> v;
    for (const char* ch : dsp::kChannelNames) {
      for (const char* f : kTimeFeatureNames) v.push_back(std::string(ch) + "_" + f);
      for (const char* f : kFreqFeatureNames) v.push_back(std::string(ch) + "_" + f);
    }
    for (const char* f : kMetaFeatureNames) v.emplace_back(f);
    return v;
  }();
  static const std::vector<std::string> stage2 = [] {
    auto v = stage1;
    v.emplace_back(kRelativeStartTimeName);
    return v;
  }();
  return stage == Stage::Stage1 ? stage1 : stage2;
}

SegmentView SegmentView::of(const dsp::Segment& seg) {
  SegmentView v;
  for (int c = 0; c < dsp::kNumChannels; ++c) v.channels[c] = seg.channels[c];
  v.sample_rate_hz = seg.sample_rate_hz;
  v.start_s = seg.start_s();
  return v;
}

SegmentView SegmentView::of(const dsp::ConditionedSignal& sig, std::size_t start, std::size_t length) {
  if (start + length > sig.size()) fail(ErrorCategory::Range, "segment exceeds signal length");
  SegmentView v;
  for (int c = 0; c < dsp::kNumChannels; ++c) v.channels[c] = std::span<const double>(sig.channels[c]).subspan(start, length);
  v.sample_rate_hz = sig.sample_rate_hz;
  v.start_s = static_cast<double>(start) / sig.sample_rate_hz;
  return v;
}

FeatureVector assemble(const SegmentView& segment, const SubjectMeta& subject, Stage stage,
                       const std::optional<OepInterval>& oep) {
  if (stage == Stage::Stage2 && !oep) fail(ErrorCategory::Parameter, "stage-2 features need the OEP interval");
  FeatureVector fv;
  fv.stage = stage;
  fv.values.reserve(kStage2Length);
  for (const auto& ch : segment.channels) {
    const auto t = time_features(ch, segment.sample_rate_hz);
    const auto f = freq_features(ch, segment.sample_rate_hz);
    fv.values.insert(fv.values.end(), t.begin(), t.end());
    fv.values.insert(fv.values.end(), f.begin(), f.end());
  }
  const auto meta = meta_features(subject);
  fv.values.insert(fv.values.end(), meta.begin(), meta.end());
  if (stage == Stage::Stage2) fv.values.push_back(relative_start_time(segment.start_s, *oep));
  return fv;
}

FeatureVector assemble(const dsp::Segment& segment, const SubjectMeta& subject, Stage stage,
                       const std::optional<OepInterval>& oep) {
  return assemble(SegmentView::of(segment), subject, stage, oep);
}

NormStats fit_norm(std::span<const double> train, std::size_t cols) {
  if (cols == 0 || train.empty()) fail(ErrorCategory::Parameter, "cannot fit normalization on an empty training set");
  if (train.size() % cols != 0) fail(ErrorCategory::Data, "training matrix size is not a multiple of its width");
  const std::size_t rows = train.size() / cols;
  NormStats s;
  s.mean.assign(cols, 0.0);
  s.std.assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) s.mean[c] += train[r * cols + c];
  for (auto& m : s.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = train[r * cols + c] - s.mean[c];
      s.std[c] += d * d;
    }
  for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(rows));
  return s;
}

NormStats fit_norm(const std::vector<FeatureVector>& train) {
  if (train.empty()) fail(ErrorCategory::Parameter, "cannot fit normalization on an empty training set");
  const std::size_t cols = train.front().values.size();
  std::vector<double> flat;
  flat.reserve(cols * train.size());
  for (const auto& v : train) {
    if (v.values.size() != cols) fail(ErrorCategory::Data, "feature vectors have different lengths");
    flat.insert(flat.end(), v.values.begin(), v.values.end());
  }
  return fit_norm(flat, cols);
}

void apply_norm_inplace(const NormStats& stats, std::span<double> row) {
  if (row.size() != stats.mean.size()) fail(ErrorCategory::Data, "feature vector length does not match normalization");
  for (std::size_t c = 0; c < row.size(); ++c)
    row[c] = stats.std[c] < 1e-12 ? 0.0 : (row[c] - stats.mean[c]) / stats.std[c];
}

FeatureVector apply_norm(const NormStats& stats, const FeatureVector& v) {
  FeatureVector out = v;
  apply_norm_inplace(stats, out.values);
  return out;
}

}  // namespace oep::features
