#pragma once

// Classical classifiers trained on normalized hand-crafted features: KNN,
// RBF-kernel SVM trained by SMO (one-vs-one), and a random forest.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oep/error.hpp"
#include "oep/features.hpp"

namespace oep::models {

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const { return data_; }

  void append_row(std::span<const double> values);
  Matrix select_rows(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ModelKind { Knn, SvmRbf, RandomForest };
const char* kind_name(ModelKind k);
ModelKind parse_kind(const std::string& s);

struct Hyperparams {
  int k = 0;            // knn
  double C = 0;         // svm
  double gamma = 0;     // svm
  int n_trees = 0;      // forest
  int max_depth = 0;    // forest

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};
std::string describe(ModelKind kind, const Hyperparams& h);

// Search spaces.
struct HyperGrid {
  static const std::vector<int>& knn_k();
  static const std::vector<double>& svm_C();
  static const std::vector<double>& svm_gamma();
  static const std::vector<int>& rf_trees();
  static const std::vector<int>& rf_max_depth();
};

// Full Cartesian grid in declaration order (outer loop over the first listed
// hyperparameter).
std::vector<Hyperparams> grid_candidates(ModelKind kind);

// Sorted unique labels.
std::vector<int> class_set(std::span<const int> y);

// ---------------------------------------------------------------- KNN

struct KnnParams {
  int k = 0;
  Matrix X;
  std::vector<int> y;
};

KnnParams knn_fit(const Matrix& X, std::span<const int> y, int k);
int knn_predict(const KnnParams& model, std::span<const double> x);

// ---------------------------------------------------------------- SVM

struct SmoOptions {
  double tolerance = 1e-3;
  long max_epochs = 10000;  // iteration cap = max_epochs * n
};

struct SmoResult {
  std::vector<double> alpha;
  double rho = 0;  // decision = sum(alpha_i y_i K(x_i, x)) - rho
  long iterations = 0;
  double final_gap = 0;
};

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

// Binary soft-margin dual by SMO with maximal-violating-pair selection.
// `y` holds +1/-1. Throws Training if the iteration cap is hit.
SmoResult smo_solve(const Matrix& X, std::span<const int> y, double C, double gamma, const SmoOptions& opt = {});

struct SvmBinary {
  int positive = 0;  // label voted for when decision > 0
  int negative = 0;
  double rho = 0;
  std::vector<double> coef;  // alpha_i * y_i for support vectors
  Matrix support;
};

struct SvmParams {
  double C = 0;
  double gamma = 0;
  std::vector<int> classes;
  std::vector<SvmBinary> pairs;  // (classes[a], classes[b]) for a < b, lexicographic
};

double svm_decision(const SvmBinary& pair, std::span<const double> x, double gamma);
SvmParams svm_fit(const Matrix& X, std::span<const int> y, double C, double gamma, const SmoOptions& opt = {});
int svm_predict(const SvmParams& model, std::span<const double> x);

// ---------------------------------------------------------------- Forest

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int depth = 0;
  std::vector<int> counts;  // per class index, samples reaching the node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int depth() const;
};

struct ForestParams {
  std::vector<int> classes;
  std::vector<DecisionTree> trees;
  int max_depth = 0;
  std::uint64_t seed = 0;
};

// Bootstrap sample of tree `tree`, drawn from a stream derived from (seed, tree).
std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t tree, std::size_t n);
std::size_t candidate_feature_count(std::size_t d);

// Node candidate features and split randomness are seeded by the node's
// path from the root, so a forest grown with (n, depth) equals the first n
// trees of any larger forest truncated at `depth`.
ForestParams rf_fit(const Matrix& X, std::span<const int> y, int n_trees, int max_depth, std::uint64_t seed);
int rf_predict(const ForestParams& model, std::span<const double> x);
// Prediction of the forest restricted to its first `n_trees` trees, each cut at `depth`.
int rf_predict_truncated(const ForestParams& model, std::span<const double> x, int n_trees, int depth);
// Per tree, the class index predicted at every truncation depth 1..max_depth.
void rf_path_classes(const DecisionTree& tree, std::span<const double> x, int max_depth, std::span<int> out);

// ---------------------------------------------------------------- Unified

struct TrainedModel {
  ModelKind kind = ModelKind::RandomForest;
  Hyperparams hyper;
  features::NormStats norm;
  std::vector<int> classes;
  std::string provenance;  // how the hyperparameters were chosen
  std::variant<KnnParams, SvmParams, ForestParams> params;
};

// Fits normalization on `X_raw` then the classifier on the normalized rows.
TrainedModel fit_model(ModelKind kind, const Hyperparams& h, const Matrix& X_raw, std::span<const int> y,
                       std::uint64_t seed);
int predict(const TrainedModel& model, std::span<const double> x_raw);
std::vector<int> predict_rows(const TrainedModel& model, const Matrix& X_raw);

}  // namespace oep::models
