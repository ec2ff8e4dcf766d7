#pragma once

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oep/core.hpp"
#include "oep/dsp.hpp"

namespace oep::features {

inline constexpr int kNumTimeFeatures = 15;
inline constexpr int kNumFreqFeatures = 9;
inline constexpr int kPerChannel = kNumTimeFeatures + kNumFreqFeatures;
inline constexpr int kNumMetaFeatures = 5;
inline constexpr int kStage1Length = dsp::kNumChannels * kPerChannel + kNumMetaFeatures;  // 173
inline constexpr int kStage2Length = kStage1Length + 1;                                   // 174

extern const std::array<const char*, kNumTimeFeatures> kTimeFeatureNames;
extern const std::array<const char*, kNumFreqFeatures> kFreqFeatureNames;
extern const std::array<const char*, kNumMetaFeatures> kMetaFeatureNames;
inline constexpr const char* kRelativeStartTimeName = "relative_start_time";

enum class Stage { Stage1, Stage2 };

// Order: interquartile range, kurtosis, max, mean, median, min, rms, skewness,
// std, variance, absolute energy, lag-1 autocorrelation, temporal centroid,
// histogram entropy, zero-crossing rate.
std::array<double, kNumTimeFeatures> time_features(std::span<const double> x, double fs);

// Spectrum of x zero-padded to the next power of two N >= n; bins 0..N/2.
std::vector<std::complex<double>> real_fft(std::span<const double> x);
std::size_t padded_length(std::size_t n);

// Order: FFT mean coefficient, fundamental frequency, human range energy,
// max power spectrum, maximum frequency, median frequency, spectral entropy,
// spectral kurtosis, spectral skewness.
std::array<double, kNumFreqFeatures> freq_features(std::span<const double> x, double fs);

std::array<double, kNumMetaFeatures> meta_features(const SubjectMeta& subject);

struct OepInterval {
  double start_s = 0;
  double end_s = 0;
};

double relative_start_time(double segment_start_s, const OepInterval& oep);

struct FeatureVector {
  std::vector<double> values;
  Stage stage = Stage::Stage1;
};

const std::vector<std::string>& feature_names(Stage stage);

// Non-owning view of one window over the seven conditioned channels.
struct SegmentView {
  std::array<std::span<const double>, dsp::kNumChannels> channels;
  double sample_rate_hz = 0;
  double start_s = 0;

  static SegmentView of(const dsp::Segment& seg);
  static SegmentView of(const dsp::ConditionedSignal& sig, std::size_t start, std::size_t length);
};

FeatureVector assemble(const SegmentView& segment, const SubjectMeta& subject, Stage stage,
                       const std::optional<OepInterval>& oep = std::nullopt);
FeatureVector assemble(const dsp::Segment& segment, const SubjectMeta& subject, Stage stage,
                       const std::optional<OepInterval>& oep = std::nullopt);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

// Population z-score statistics over the rows of `train` (row-major, `cols` wide).
NormStats fit_norm(std::span<const double> train, std::size_t cols);
NormStats fit_norm(const std::vector<FeatureVector>& train);
void apply_norm_inplace(const NormStats& stats, std::span<double> row);
FeatureVector apply_norm(const NormStats& stats, const FeatureVector& v);

}  // namespace oep::features
