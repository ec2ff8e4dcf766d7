#include "oep/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "oep/random.hpp"

namespace oep::models {

Matrix::Matrix(std::size_t cols, std::vector<double> data) : cols_(cols), data_(std::move(data)) {
  if (cols_ == 0) {
    if (!data_.empty()) fail(ErrorCategory::Data, "matrix with zero columns cannot hold data");
    return;
  }
  if (data_.size() % cols_ != 0) fail(ErrorCategory::Data, "matrix data is not a multiple of the row width");
  rows_ = data_.size() / cols_;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) fail(ErrorCategory::Data, "row width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Knn: return "knn";
    case ModelKind::SvmRbf: return "svm_rbf";
    case ModelKind::RandomForest: return "random_forest";
  }
  return "?";
}

ModelKind parse_kind(const std::string& s) {
  if (s == "knn") return ModelKind::Knn;
  if (s == "svm_rbf" || s == "svm") return ModelKind::SvmRbf;
  if (s == "random_forest" || s == "rf") return ModelKind::RandomForest;
  fail(ErrorCategory::Config, "unknown model kind '" + s + "' (expected knn, svm_rbf or random_forest)");
}

std::string describe(ModelKind kind, const Hyperparams& h) {
  std::ostringstream os;
  switch (kind) {
    case ModelKind::Knn: os << "k=" << h.k; break;
    case ModelKind::SvmRbf: os << "C=" << h.C << ",gamma=" << h.gamma; break;
    case ModelKind::RandomForest: os << "n_trees=" << h.n_trees << ",max_depth=" << h.max_depth; break;
  }
  return os.str();
}

const std::vector<int>& HyperGrid::knn_k() {
  static const std::vector<int> v = {3, 5, 7, 9};
  return v;
}
const std::vector<double>& HyperGrid::svm_C() {
  static const std::vector<double> v = {10, 1, 0.1, 0.01, 0.001};
  return v;
}
const std::vector<double>& HyperGrid::svm_gamma() {
  static const std::vector<double> v = {10, 1, 0.1, 0.01, 0.001};
  return v;
}
const std::vector<int>& HyperGrid::rf_trees() {
  static const std::vector<int> v = {50, 100, 200};
  return v;
}
const std::vector<int>& HyperGrid::rf_max_depth() {
  static const std::vector<int> v = [] {
    std::vector<int> d(35);
    std::iota(d.begin(), d.end(), 1);
    return d;
  }();
  return v;
}

std::vector<Hyperparams> grid_candidates(ModelKind kind) {
  std::vector<Hyperparams> out;
  switch (kind) {
    case ModelKind::Knn:
      for (int k : HyperGrid::knn_k()) out.push_back({.k = k});
      break;
    case ModelKind::SvmRbf:
      for (double c : HyperGrid::svm_C())
        for (double g : HyperGrid::svm_gamma()) out.push_back({.C = c, .gamma = g});
      break;
    case ModelKind::RandomForest:
      for (int t : HyperGrid::rf_trees())
        for (int d : HyperGrid::rf_max_depth()) out.push_back({.n_trees = t, .max_depth = d});
      break;
  }
  return out;
}

std::vector<int> class_set(std::span<const int> y) {
  std::vector<int> c(y.begin(), y.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_xy(const Matrix& X, std::span<const int> y) {
  if (X.rows() == 0) fail(ErrorCategory::Parameter, "training set is empty");
  if (X.rows() != y.size()) fail(ErrorCategory::Data, "feature rows and labels differ in count");
}

std::size_t class_index(const std::vector<int>& classes, int label) {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  return static_cast<std::size_t>(it - classes.begin());
}

}  // namespace

// ---------------------------------------------------------------- KNN

KnnParams knn_fit(const Matrix& X, std::span<const int> y, int k) {
  check_xy(X, y);
  if (k < 1 || static_cast<std::size_t>(k) > X.rows())
    fail(ErrorCategory::Parameter, "k must lie in [1, number of training points]");
  return KnnParams{k, X, std::vector<int>(y.begin(), y.end())};
}

int knn_predict(const KnnParams& m, std::span<const double> x) {
  const std::size_t n = m.X.rows();
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = {std::sqrt(squared_distance(m.X.row(i), x)), i};
  const auto k = static_cast<std::size_t>(m.k);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());

  std::map<int, std::pair<int, double>> votes;  // label -> (count, distance sum)
  for (std::size_t i = 0; i < k; ++i) {
    auto& v = votes[m.y[d[i].second]];
    v.first += 1;
    v.second += d[i].first;
  }
  int best = 0;
  int best_count = -1;
  double best_mean = 0;
  for (const auto& [label, v] : votes) {  // ascending label order
    const double mean = v.second / v.first;
    if (v.first > best_count || (v.first == best_count && mean < best_mean)) {
      best = label;
      best_count = v.first;
      best_mean = mean;
    }
  }
  return best;
}

// ---------------------------------------------------------------- SVM

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
  return std::exp(-gamma * squared_distance(u, v));
}

namespace {

// Kernel rows computed on demand; the whole matrix is kept when it fits the
// budget, otherwise a bounded set of rows is cached and flushed when full.
class KernelRows {
 public:
  KernelRows(const Matrix& X, double gamma) : X_(X), gamma_(gamma), rows_(X.rows()) {
    const std::size_t n = X.rows();
    max_cached_ = std::max<std::size_t>(2, kBudgetDoubles / std::max<std::size_t>(n, 1));
    diag_.resize(n, 1.0);  // K(x, x) = 1 for the RBF kernel
  }

  const std::vector<double>& row(std::size_t i) {
    auto& r = rows_[i];
    if (!r.empty()) return r;
    if (cached_.size() >= max_cached_) {
      for (std::size_t j : cached_)
        if (j != pinned_) std::vector<double>().swap(rows_[j]);
      cached_.clear();
      if (!rows_[pinned_].empty()) cached_.push_back(pinned_);
    }
    r.resize(X_.rows());
    for (std::size_t j = 0; j < X_.rows(); ++j) r[j] = rbf_kernel(X_.row(i), X_.row(j), gamma_);
    cached_.push_back(i);
    return r;
  }

  // Keeps row i alive across the next row() call.
  void pin(std::size_t i) { pinned_ = i; }
  double diag(std::size_t i) const { return diag_[i]; }

 private:
  static constexpr std::size_t kBudgetDoubles = std::size_t{1} << 24;  // 128 MiB
  const Matrix& X_;
  double gamma_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::size_t> cached_;
  std::vector<double> diag_;
  std::size_t max_cached_ = 0;
  std::size_t pinned_ = 0;
};

}  // namespace

SmoResult smo_solve(const Matrix& X, std::span<const int> y, double C, double gamma, const SmoOptions& opt) {
  check_xy(X, y);
  if (!(C > 0) || !(gamma > 0)) fail(ErrorCategory::Parameter, "C and gamma must be positive");
  const std::size_t n = X.rows();
  for (int v : y)
    if (v != 1 && v != -1) fail(ErrorCategory::Parameter, "binary SMO expects labels +1/-1");

  constexpr double kTau = 1e-12;
  KernelRows K(X, gamma);
  SmoResult res;
  res.alpha.assign(n, 0.0);
  std::vector<double> G(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  auto& a = res.alpha;
  auto up = [&](std::size_t t) { return (y[t] == 1 && a[t] < C) || (y[t] == -1 && a[t] > 0); };
  auto low = [&](std::size_t t) { return (y[t] == 1 && a[t] > 0) || (y[t] == -1 && a[t] < C); };

  const long max_iter = opt.max_epochs * static_cast<long>(std::max<std::size_t>(n, 1));
  double gap = 0;
  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = (i == n || j == n) ? 0.0 : gmax - gmin;
    if (gap < opt.tolerance) break;
    if (res.iterations >= max_iter) {
      std::ostringstream os;
      os << "SMO did not converge after " << res.iterations << " iterations (KKT violation " << gap << ")";
      fail(ErrorCategory::Training, os.str());
    }
    ++res.iterations;

    K.pin(i);
    const auto& Ki = K.row(i);
    const auto& Kj = K.row(j);
    const double yi = y[i], yj = y[j];
    const double old_ai = a[i], old_aj = a[j];
    const double Qij = yi * yj * Ki[j];
    if (y[i] != y[j]) {
      double quad = K.diag(i) + K.diag(j) + 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
      }
      if (diff > 0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else {
        if (a[j] > C) { a[j] = C; a[i] = C + diff; }
      }
    } else {
      double quad = K.diag(i) + K.diag(j) - 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
      } else {
        if (a[j] < 0) { a[j] = 0; a[i] = sum; }
      }
      if (sum > C) {
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = sum; }
      }
    }
    const double dai = a[i] - old_ai, daj = a[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (yi * Ki[t] * dai + yj * Kj[t] * daj);
  }
  res.final_gap = gap;

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yG = y[t] * G[t];
    if (a[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else if (a[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else {
      ++n_free;
      sum_free += yG;
    }
  }
  res.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2;
  return res;
}

double svm_decision(const SvmBinary& pair, std::span<const double> x, double gamma) {
  double s = -pair.rho;
  for (std::size_t i = 0; i < pair.coef.size(); ++i) s += pair.coef[i] * rbf_kernel(pair.support.row(i), x, gamma);
  return s;
}

SvmParams svm_fit(const Matrix& X, std::span<const int> y, double C, double gamma, const SmoOptions& opt) {
  check_xy(X, y);
  SvmParams m;
  m.C = C;
  m.gamma = gamma;
  m.classes = class_set(y);
  if (m.classes.size() < 2) fail(ErrorCategory::Parameter, "SVM training needs at least two classes");
  for (std::size_t a = 0; a < m.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < m.classes.size(); ++b) {
      std::vector<std::size_t> idx;
      std::vector<int> yy;
      for (std::size_t r = 0; r < y.size(); ++r) {
        if (y[r] == m.classes[a]) {
          idx.push_back(r);
          yy.push_back(1);
        } else if (y[r] == m.classes[b]) {
          idx.push_back(r);
          yy.push_back(-1);
        }
      }
      const Matrix sub = X.select_rows(idx);
      const SmoResult res = smo_solve(sub, yy, C, gamma, opt);
      SvmBinary pair;
      pair.positive = m.classes[a];
      pair.negative = m.classes[b];
      pair.rho = res.rho;
      pair.support = Matrix(0, X.cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (res.alpha[i] <= 0) continue;
        pair.coef.push_back(res.alpha[i] * yy[i]);
        pair.support.append_row(sub.row(i));
      }
      m.pairs.push_back(std::move(pair));
    }
  }
  return m;
}

int svm_predict(const SvmParams& m, std::span<const double> x) {
  const std::size_t nc = m.classes.size();
  std::vector<int> votes(nc, 0);
  std::vector<double> score(nc, 0.0);
  for (const auto& p : m.pairs) {
    const double d = svm_decision(p, x, m.gamma);
    const std::size_t a = class_index(m.classes, p.positive);
    const std::size_t b = class_index(m.classes, p.negative);
    ++votes[d > 0 ? a : b];
    score[a] += d;
    score[b] -= d;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < nc; ++c)
    if (votes[c] > votes[best] || (votes[c] == votes[best] && score[c] > score[best])) best = c;
  return m.classes[best];
}

// ---------------------------------------------------------------- Forest

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t tree, std::size_t n) {
  Rng rng(derive_seed(seed, 0xB0075 + tree));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

std::size_t candidate_feature_count(std::size_t d) {
  auto m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  while (m * m < d) ++m;
  while (m > 1 && (m - 1) * (m - 1) >= d) --m;
  return std::max<std::size_t>(1, std::min(m, d));
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double decrease = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<int>& cls, std::size_t n_classes, int max_depth, std::uint64_t tree_seed,
              const std::vector<std::vector<std::uint32_t>>& order)
      : X_(X), cls_(cls), nc_(n_classes), max_depth_(max_depth), seed_(tree_seed), order_(order),
        mult_(X.rows(), 0) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    samples_ = std::move(samples);
    DecisionTree tree;
    struct Work {
      int node;
      std::size_t begin, end;
      std::uint64_t path;
    };
    std::vector<Work> stack;
    tree.nodes.push_back(make_node(0, samples_.size(), 0));
    stack.push_back({0, 0, samples_.size(), 1});
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      const int depth = tree.nodes[w.node].depth;
      if (depth >= max_depth_ || is_pure(tree.nodes[w.node].counts) || w.end - w.begin < 2) continue;
      const SplitChoice s = best_split(w.begin, w.end, w.path);
      if (s.feature < 0) continue;
      const auto f = static_cast<std::size_t>(s.feature);
      const auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                         samples_.begin() + static_cast<std::ptrdiff_t>(w.end),
                                         [&](std::size_t r) { return X_(r, f) <= s.threshold; });
      const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());
      if (mid == w.begin || mid == w.end) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_node(w.begin, mid, depth + 1));
      tree.nodes.push_back(make_node(mid, w.end, depth + 1));
      auto& node = tree.nodes[w.node];
      node.feature = s.feature;
      node.threshold = s.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, mid, w.end, w.path * 2 + 1});
      stack.push_back({left, w.begin, mid, w.path * 2});
    }
    return tree;
  }

 private:
  TreeNode make_node(std::size_t begin, std::size_t end, int depth) const {
    TreeNode n;
    n.depth = depth;
    n.counts.assign(nc_, 0);
    for (std::size_t i = begin; i < end; ++i) ++n.counts[cls_[samples_[i]]];
    return n;
  }

  static bool is_pure(const std::vector<int>& counts) {
    int nonzero = 0;
    for (int c : counts) nonzero += c > 0;
    return nonzero <= 1;
  }

  SplitChoice best_split(std::size_t begin, std::size_t end, std::uint64_t path) {
    const std::size_t d = X_.cols();
    const std::size_t m = candidate_feature_count(d);
    // Partial Fisher-Yates over feature indices, seeded by the node path.
    Rng rng(derive_seed(seed_, path));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
      std::swap(features_[i], features_[j]);
    }
    std::vector<std::size_t> cand(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(cand.begin(), cand.end());

    const std::size_t n = end - begin;
    const double dn = static_cast<double>(n);
    std::vector<int> total(nc_, 0);
    for (std::size_t i = begin; i < end; ++i) ++total[cls_[samples_[i]]];
    double parent_sq = 0;
    for (int c : total) parent_sq += static_cast<double>(c) * c;

    SplitChoice best;
    double best_score = -1;
    std::vector<int> left(nc_);
    // Large nodes walk the forest-wide presorted column instead of sorting;
    // both give the same value order, and equal values never split.
    const double rows = static_cast<double>(X_.rows());
    const bool scan = rows < 2.0 * dn * std::log2(dn + 1);
    if (scan)
      for (std::size_t i = begin; i < end; ++i) ++mult_[samples_[i]];
    for (std::size_t f : cand) {
      buf_.resize(n);
      if (scan) {
        std::size_t k = 0;
        for (std::uint32_t r : order_[f])
          for (int c = mult_[r]; c > 0; --c) buf_[k++] = {X_(r, f), cls_[r]};
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t r = samples_[begin + i];
          buf_[i] = {X_(r, f), cls_[r]};
        }
        std::sort(buf_.begin(), buf_.end());
      }
      if (buf_.front().first == buf_.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      double sq_left = 0, sq_right = parent_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const int c = buf_[i].second;
        const double cl = left[c];
        const double cr = total[c] - cl;
        sq_left += 2 * cl + 1;
        sq_right -= 2 * cr - 1;
        ++left[c];
        if (buf_[i].first == buf_[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double score = sq_left / nl + sq_right / (dn - nl);
        if (score > best_score) {
          best_score = score;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (buf_[i].first + buf_[i + 1].first);
        }
      }
    }
    if (scan)
      for (std::size_t i = begin; i < end; ++i) mult_[samples_[i]] = 0;
    if (best.feature < 0) return best;
    // Gini decrease = sum over children of (sum c^2 / n_child) / n - parent sum c^2 / n^2.
    best.decrease = best_score / dn - parent_sq / (dn * dn);
    if (best.decrease <= 1e-12) best.feature = -1;
    return best;
  }

  const Matrix& X_;
  const std::vector<int>& cls_;
  std::size_t nc_;
  int max_depth_;
  std::uint64_t seed_;
  std::vector<std::size_t> samples_;
  std::vector<std::size_t> features_;
  const std::vector<std::vector<std::uint32_t>>& order_;
  std::vector<int> mult_;  // bootstrap copies of each row in the current node
  std::vector<std::pair<double, int>> buf_;
};

std::size_t argmax_first(const std::vector<int>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

int tree_class(const DecisionTree& t, std::span<const double> x, int depth_limit) {
  const TreeNode* node = &t.nodes[0];
  while (node->feature >= 0 && node->depth < depth_limit)
    node = &t.nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
  return static_cast<int>(argmax_first(node->counts));
}

}  // namespace

ForestParams rf_fit(const Matrix& X, std::span<const int> y, int n_trees, int max_depth, std::uint64_t seed) {
  check_xy(X, y);
  if (max_depth < 1) fail(ErrorCategory::Parameter, "max_depth must be >= 1");
  if (n_trees < 1) fail(ErrorCategory::Parameter, "n_trees must be >= 1");
  ForestParams f;
  f.classes = class_set(y);
  f.max_depth = max_depth;
  f.seed = seed;
  std::vector<int> cls(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) cls[i] = static_cast<int>(class_index(f.classes, y[i]));
  std::vector<std::vector<std::uint32_t>> order(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    auto& o = order[c];
    o.resize(X.rows());
    std::iota(o.begin(), o.end(), std::uint32_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, c) < X(b, c); });
  }
  for (int t = 0; t < n_trees; ++t) {
    const auto tree_index = static_cast<std::size_t>(t);
    TreeBuilder builder(X, cls, f.classes.size(), max_depth, derive_seed(seed, 0x7EE + tree_index), order);
    f.trees.push_back(builder.build(bootstrap_indices(seed, tree_index, X.rows())));
  }
  return f;
}

int rf_predict_truncated(const ForestParams& m, std::span<const double> x, int n_trees, int depth) {
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(std::max(n_trees, 0)), m.trees.size());
  std::vector<int> votes(m.classes.size(), 0);
  for (std::size_t t = 0; t < limit; ++t) ++votes[static_cast<std::size_t>(tree_class(m.trees[t], x, depth))];
  return m.classes[argmax_first(votes)];
}

int rf_predict(const ForestParams& m, std::span<const double> x) {
  return rf_predict_truncated(m, x, static_cast<int>(m.trees.size()), m.max_depth);
}

void rf_path_classes(const DecisionTree& tree, std::span<const double> x, int max_depth, std::span<int> out) {
  const TreeNode* node = &tree.nodes[0];
  for (int d = 1; d <= max_depth; ++d) {
    if (node->feature >= 0 && node->depth < d)
      node = &tree.nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
    out[static_cast<std::size_t>(d - 1)] = static_cast<int>(argmax_first(node->counts));
  }
}

// ---------------------------------------------------------------- Unified

TrainedModel fit_model(ModelKind kind, const Hyperparams& h, const Matrix& X_raw, std::span<const int> y,
                       std::uint64_t seed) {
  check_xy(X_raw, y);
  TrainedModel m;
  m.kind = kind;
  m.hyper = h;
  m.norm = features::fit_norm(X_raw.data(), X_raw.cols());
  m.classes = class_set(y);
  Matrix X = X_raw;
  for (std::size_t r = 0; r < X.rows(); ++r) features::apply_norm_inplace(m.norm, X.row(r));
  switch (kind) {
    case ModelKind::Knn: m.params = knn_fit(X, y, h.k); break;
    case ModelKind::SvmRbf: m.params = svm_fit(X, y, h.C, h.gamma); break;
    case ModelKind::RandomForest: m.params = rf_fit(X, y, h.n_trees, h.max_depth, seed); break;
  }
  return m;
}

int predict(const TrainedModel& m, std::span<const double> x_raw) {
  std::vector<double> x(x_raw.begin(), x_raw.end());
  features::apply_norm_inplace(m.norm, x);
  return std::visit(
      [&](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, KnnParams>) return knn_predict(p, x);
        else if constexpr (std::is_same_v<T, SvmParams>) return svm_predict(p, x);
        else return rf_predict(p, x);
      },
      m.params);
}

std::vector<int> predict_rows(const TrainedModel& m, const Matrix& X_raw) {
  std::vector<int> out(X_raw.rows());
  for (std::size_t r = 0; r < X_raw.rows(); ++r) out[r] = predict(m, X_raw.row(r));
  return out;
}

}  // namespace oep::models
