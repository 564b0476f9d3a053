#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "advaware/common.hpp"
#include "advaware/data.hpp"

namespace advaware {

// Class orderings. Classes are sorted by descending score; equal scores
// are ordered by ascending class index.

std::vector<ClassIndex> ranking(const VectorXd& scores);
std::vector<ClassIndex> top_k(const VectorXd& scores, int k);
/// 1-based position of c in ranking(scores). c is in top_k(scores, k) iff rank_of(scores, c) <= k.
int rank_of(const VectorXd& scores, ClassIndex c);

/// A classifier that can rank every class for a flattened image.
class Verifier {
 public:
  virtual ~Verifier() = default;

  [[nodiscard]] virtual VectorXd predict_proba(const VectorXd& v) const = 0;
  [[nodiscard]] virtual int class_count() const = 0;
  [[nodiscard]] virtual int feature_dim() const = 0;

  [[nodiscard]] std::vector<ClassIndex> top_k(const VectorXd& v, int k) const;
  [[nodiscard]] int rank_of(const VectorXd& v, ClassIndex c) const;
  [[nodiscard]] ClassIndex predict(const VectorXd& v) const { return top_k(v, 1).front(); }

 protected:
  void check_dim(const VectorXd& v) const;
};

/// Top-1 accuracy of a verifier over a dataset.
double accuracy(const Verifier& verifier, const Dataset& d);

struct ForestConfig {
  int tree_count = 100;
  int max_depth = 16;
  int features_per_split = 0;  // 0 selects floor(sqrt(d))
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

/// Internal nodes route v[feature] <= threshold to the left child. Leaves
/// carry the class histogram of the (bootstrap) samples that reached them.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> histogram;

  [[nodiscard]] bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, int class_count) : nodes_(std::move(nodes)), class_count_(class_count) {}

  [[nodiscard]] const TreeNode& leaf_for(const VectorXd& v) const;
  /// Normalized leaf histogram.
  [[nodiscard]] VectorXd distribution(const VectorXd& v) const;
  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] int class_count() const { return class_count_; }
  [[nodiscard]] int depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
  int class_count_ = 0;
};

/// Grows one CART tree on the rows of `features` listed in `samples`
/// (duplicates allowed). `feature_order_seed` drives the per-split feature
/// sampling.
DecisionTree fit_tree(const MatrixXd& features, const std::vector<ClassIndex>& labels,
                      const std::vector<std::size_t>& samples, int class_count, const ForestConfig& cfg,
                      std::uint64_t feature_order_seed);

class RandomForest final : public Verifier {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, ForestConfig cfg, int class_count, int feature_dim);

  [[nodiscard]] VectorXd predict_proba(const VectorXd& v) const override;
  [[nodiscard]] int class_count() const override { return class_count_; }
  [[nodiscard]] int feature_dim() const override { return feature_dim_; }

  [[nodiscard]] const std::vector<DecisionTree>& trees() const { return trees_; }
  [[nodiscard]] const ForestConfig& config() const { return cfg_; }

  friend bool operator==(const RandomForest& a, const RandomForest& b) {
    return a.trees_ == b.trees_ && a.class_count_ == b.class_count_ && a.feature_dim_ == b.feature_dim_;
  }

 private:
  std::vector<DecisionTree> trees_;
  ForestConfig cfg_;
  int class_count_ = 0;
  int feature_dim_ = 0;
};

/// Bagged Gini trees over flattened pixels. Trees are grown in parallel,
/// each from its own seed stream, so the result does not depend on jobs().
RandomForest fit_forest(const Dataset& d, const ForestConfig& cfg);

/// Brute-force Euclidean k-NN. Scores are neighbor vote fractions; distance
/// ties are resolved toward the smaller training index.
class KnnVerifier final : public Verifier {
 public:
  KnnVerifier(const Dataset& train, int neighbors);

  [[nodiscard]] VectorXd predict_proba(const VectorXd& v) const override;
  [[nodiscard]] int class_count() const override { return class_count_; }
  [[nodiscard]] int feature_dim() const override { return static_cast<int>(points_.cols()); }
  [[nodiscard]] int neighbors() const { return neighbors_; }

 private:
  MatrixXd points_;  // one row per training sample
  std::vector<ClassIndex> labels_;
  int neighbors_;
  int class_count_;
};

std::vector<ClassIndex> knn_top_k(const Dataset& train, const VectorXd& v, int neighbors, int k);

}  // namespace advaware
