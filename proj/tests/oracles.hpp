#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. None of these reuse library code paths beyond data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "oep/cv.hpp"
#include "oep/eval.hpp"
#include "oep/models.hpp"
#include "oep/random.hpp"

namespace oracle {

// DFT of x zero-padded to n, bins 0..n/2.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double a = -2 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
    twiddle[m] = {std::cos(a), std::sin(a)};
  }
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < x.size(); ++t) acc += x[t] * twiddle[k * t % n];
    out[k] = acc;
  }
  return out;
}

// Magnitude of the prewarped analog Butterworth prototype.
inline double butterworth_magnitude(int order, double fc, double fs, double f) {
  const double wc = std::tan(std::numbers::pi * fc / fs);
  const double w = std::tan(std::numbers::pi * f / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(w / wc, 2 * order));
}

// k-NN by full sort on (distance, index), majority, then smallest mean
// distance, then smallest label.
inline int brute_knn(const oep::models::Matrix& X, const std::vector<int>& y, int k, std::span<const double> q) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0;
    for (std::size_t c = 0; c < X.cols(); ++c) s += (X(i, c) - q[c]) * (X(i, c) - q[c]);
    d.push_back({std::sqrt(s), i});
  }
  std::sort(d.begin(), d.end());
  std::map<int, std::pair<int, double>> votes;
  for (int i = 0; i < k; ++i) {
    votes[y[d[i].second]].first++;
    votes[y[d[i].second]].second += d[i].first;
  }
  int best = 0, count = -1;
  double mean = 0;
  for (auto& [label, v] : votes) {
    const double m = v.second / v.first;
    if (v.first > count || (v.first == count && m < mean)) {
      best = label;
      count = v.first;
      mean = m;
    }
  }
  return best;
}

// Largest KKT violation of a binary RBF dual solution, recomputed from alpha
// and rho.
inline double kkt_violation(const oep::models::Matrix& X, const std::vector<int>& y,
                            const oep::models::SmoResult& r, double C, double gamma) {
  double worst = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double f = -r.rho;
    for (std::size_t j = 0; j < X.rows(); ++j) {
      double d2 = 0;
      for (std::size_t c = 0; c < X.cols(); ++c) d2 += (X(j, c) - X(i, c)) * (X(j, c) - X(i, c));
      f += r.alpha[j] * y[j] * std::exp(-gamma * d2);
    }
    const double m = y[i] * f;
    const double a = r.alpha[i];
    if (a < 0 || a > C) return INFINITY;
    if (a <= 0) worst = std::max(worst, 1 - m);
    else if (a >= C) worst = std::max(worst, m - 1);
    else worst = std::max(worst, std::abs(m - 1));
  }
  return worst;
}

struct Toy {
  oep::models::Matrix X;
  std::vector<int> y;
};

// Gaussian blobs spaced `sep` apart along the first axis.
inline Toy blobs(oep::Rng& rng, int per_class, int classes, double sep, double sigma, std::size_t d = 2) {
  Toy t{oep::models::Matrix(0, d), {}};
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> row(d);
      for (std::size_t k = 0; k < d; ++k) row[k] = rng.normal() * sigma + (k == 0 ? sep * c : 0.0);
      t.X.append_row(row);
      t.y.push_back(c);
    }
  }
  return t;
}

// Majority over o[i-k..i+k] counted from scratch; ties keep o[i].
inline std::vector<int> recount(const std::vector<int>& o, int k) {
  std::vector<int> p = o;
  const int n = static_cast<int>(o.size());
  for (int i = k; i < n - k; ++i) {
    std::map<int, int> c;
    for (int t = i - k; t <= i + k; ++t) ++c[o[t]];
    int best = 0;
    for (auto& [l, v] : c) best = std::max(best, v);
    int winners = 0, label = 0;
    for (auto& [l, v] : c)
      if (v == best) {
        ++winners;
        label = l;
      }
    p[i] = winners > 1 ? o[i] : label;
  }
  return p;
}

// Exhaustive search over every one-to-one matching of overlapping pairs,
// crossing or not, under the lexicographic objective TP, matched pairs, fewer
// pairs ruled FP, summed IoU.
struct Best {
  int tp = -1, matched = 0, fp_ruled = 0;
  double iou = 0;
  bool better(int t, int m, int f, double i) const {
    if (t != tp) return t > tp;
    if (m != matched) return m > matched;
    if (f != fp_ruled) return f < fp_ruled;
    return i > iou + 1e-12;
  }
};

inline double overlap_iou(const oep::eval::LabeledSegment& a, const oep::eval::LabeledSegment& b) {
  const double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
  if (inter <= 0) return 0;
  return inter / (std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s));
}

inline Best brute_match(const std::vector<oep::eval::LabeledSegment>& p,
                        const std::vector<oep::eval::LabeledSegment>& t, double th) {
  Best best;
  std::vector<bool> used(t.size(), false);
  std::function<void(std::size_t, int, int, int, double)> rec = [&](std::size_t i, int tp, int m, int f, double s) {
    if (i == p.size()) {
      if (best.better(tp, m, f, s)) best = {tp, m, f, s};
      return;
    }
    rec(i + 1, tp, m, f, s);
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (used[j]) continue;
      const double v = overlap_iou(p[i], t[j]);
      if (v <= 0) continue;
      used[j] = true;
      const bool hit = v >= th;
      const bool rfp = !hit && t[j].length() <= p[i].length();
      rec(i + 1, tp + hit, m + 1, f + rfp, s + v);
      used[j] = false;
    }
  };
  rec(0, 0, 0, 0, 0.0);
  return best;
}

// Timeline at 1 Hz from (label, length) runs.
inline std::vector<int> runs(std::initializer_list<std::pair<int, int>> r) {
  std::vector<int> out;
  for (auto [l, n] : r) out.insert(out.end(), static_cast<std::size_t>(n), l);
  return out;
}

// The eight illustrated matching situations for class 0 (class 1 fills the
// gaps), with hand-counted results.
struct SegmentCase {
  const char* what;
  std::vector<int> truth, pred;
  double threshold;
  int tp, fp, fn;
};

inline std::vector<SegmentCase> illustrated_cases() {
  constexpr int A = 0, B = 1;
  return {
      {"exact match", runs({{B, 5}, {A, 10}, {B, 5}}), runs({{B, 5}, {A, 10}, {B, 5}}), 0.75, 1, 0, 0},
      {"slightly shorter, IoU 0.8", runs({{A, 10}, {B, 10}}), runs({{A, 8}, {B, 12}}), 0.75, 1, 0, 0},
      {"shifted, IoU 2/3", runs({{B, 4}, {A, 10}, {B, 6}}), runs({{B, 6}, {A, 10}, {B, 4}}), 0.5, 1, 0, 0},
      {"below threshold, truth shorter", runs({{B, 4}, {A, 4}, {B, 12}}), runs({{B, 2}, {A, 12}, {B, 6}}), 0.5, 0, 1,
       0},
      {"below threshold, truth longer", runs({{B, 2}, {A, 12}, {B, 6}}), runs({{B, 4}, {A, 4}, {B, 12}}), 0.5, 0, 0,
       1},
      {"no overlap", runs({{A, 5}, {B, 15}}), runs({{B, 10}, {A, 5}, {B, 5}}), 0.5, 0, 1, 1},
      {"over-segmented", runs({{A, 10}}), runs({{A, 6}, {B, 1}, {A, 1}, {B, 1}, {A, 1}}), 0.5, 1, 2, 0},
      {"under-segmented at 0.5", runs({{A, 4}, {B, 1}, {A, 5}}), runs({{A, 10}}), 0.5, 1, 0, 1},
      {"under-segmented at 0.75", runs({{A, 4}, {B, 1}, {A, 5}}), runs({{A, 10}}), 0.75, 0, 1, 1},
  };
}

inline std::vector<oep::cv::SubjectRef> roster(int lab, int home) {
  std::vector<oep::cv::SubjectRef> r;
  for (int i = 0; i < lab; ++i) r.push_back({"L" + std::to_string(i), oep::DatasetId::Lab});
  for (int i = 0; i < home; ++i) r.push_back({"H" + std::to_string(i), oep::DatasetId::Home});
  return r;
}

// Two noisy classes per subject in three dimensions.
inline std::vector<oep::cv::SubjectData> noisy_subjects(std::uint64_t seed, int n_subjects, int per_class,
                                                        double sep) {
  oep::Rng rng(seed);
  std::vector<oep::cv::SubjectData> out;
  for (int s = 0; s < n_subjects; ++s) {
    oep::cv::SubjectData d{"S" + std::to_string(s), oep::models::Matrix(0, 3), {}};
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < per_class; ++i) {
        d.X.append_row(std::vector<double>{rng.normal() + sep * c, rng.normal(), rng.normal()});
        d.y.push_back(c);
      }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace oracle
