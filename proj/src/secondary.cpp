#include "advaware/secondary.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace advaware {

std::vector<ClassIndex> ranking(const VectorXd& scores) {
  std::vector<ClassIndex> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ClassIndex a, ClassIndex b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<ClassIndex> top_k(const VectorXd& scores, int k) {
  if (k < 1 || k > scores.size())
    throw std::out_of_range("k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  auto order = ranking(scores);
  order.resize(static_cast<std::size_t>(k));
  return order;
}

int rank_of(const VectorXd& scores, ClassIndex c) {
  if (c < 0 || c >= scores.size()) throw std::out_of_range("class index out of range");
  int rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j)
    if (scores[j] > scores[c] || (scores[j] == scores[c] && j < c)) ++rank;
  return rank;
}

void Verifier::check_dim(const VectorXd& v) const {
  if (v.size() != feature_dim())
    throw std::invalid_argument("feature vector length " + std::to_string(v.size()) + " != " +
                                std::to_string(feature_dim()));
}

std::vector<ClassIndex> Verifier::top_k(const VectorXd& v, int k) const {
  if (k < 1 || k > class_count()) throw std::out_of_range("k=" + std::to_string(k) + " out of range");
  return advaware::top_k(predict_proba(v), k);
}

int Verifier::rank_of(const VectorXd& v, ClassIndex c) const {
  if (c < 0 || c >= class_count()) throw std::out_of_range("class index out of range");
  return advaware::rank_of(predict_proba(v), c);
}

double accuracy(const Verifier& verifier, const Dataset& d) {
  if (d.empty()) return 0;
  std::vector<char> hit(d.size());
  parallel_for(d.size(), [&](std::size_t i) { hit[i] = verifier.predict(d.images[i].pixels) == d.images[i].label; });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(d.size());
}

// ---------------------------------------------------------------------------
// Decision trees

const TreeNode& DecisionTree::leaf_for(const VectorXd& v) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) node = &nodes_[static_cast<std::size_t>(v[node->feature] <= node->threshold ? node->left : node->right)];
  return *node;
}

VectorXd DecisionTree::distribution(const VectorXd& v) const {
  const auto& h = leaf_for(v).histogram;
  VectorXd p(class_count_);
  double total = 0;
  for (int c = 0; c < class_count_; ++c) total += h[static_cast<std::size_t>(c)];
  for (int c = 0; c < class_count_; ++c) p[c] = h[static_cast<std::size_t>(c)] / total;
  return p;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

namespace {

using u128 = unsigned __int128;

/// A candidate split scored by sum_c(left_c^2)/n_left + sum_c(right_c^2)/n_right,
/// which is maximal exactly when the weighted Gini impurity is minimal. The
/// score is kept as an exact fraction so ties are detected exactly.
struct SplitScore {
  std::uint64_t left_sq = 0, right_sq = 0, n_left = 0, n_right = 0;

  [[nodiscard]] u128 numerator() const { return u128{left_sq} * n_right + u128{right_sq} * n_left; }
  [[nodiscard]] u128 denominator() const { return u128{n_left} * n_right; }
};

// a > b, exactly. Numerators stay below 2^60 and denominators below 2^40
// for nodes under 2^20 samples, so the cross products fit in 128 bits.
bool better(const SplitScore& a, const SplitScore& b) {
  return a.numerator() * b.denominator() > b.numerator() * a.denominator();
}

struct Candidate {
  bool valid = false;
  SplitScore score;
  int feature = -1;
  double threshold = 0;
};

// Lexicographic preference: higher score, then smaller feature, then smaller threshold.
bool prefer(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (better(a.score, b.score)) return true;
  if (better(b.score, a.score)) return false;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const MatrixXd& x, const std::vector<ClassIndex>& y, int class_count, const ForestConfig& cfg,
              std::uint64_t seed)
      : x_(x), y_(y), class_count_(class_count), cfg_(cfg), rng_(seed), features_(static_cast<std::size_t>(x.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
    quota_ = cfg.features_per_split > 0 ? cfg.features_per_split
                                        : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
  }

  std::vector<TreeNode> build(std::vector<std::size_t> samples) {
    struct Pending {
      std::size_t node;
      int depth;
      std::vector<std::size_t> samples;
    };
    std::vector<TreeNode> nodes(1);
    std::vector<Pending> stack;
    stack.push_back({0, 0, std::move(samples)});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      const auto hist = histogram(p.samples);
      const bool pure = std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; }) <= 1;
      Candidate split;
      if (!pure && p.depth < cfg_.max_depth && p.samples.size() >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
        split = best_split(p.samples);
      if (!split.valid) {
        nodes[p.node].histogram = hist;
        continue;
      }
      std::vector<std::size_t> left, right;
      for (auto s : p.samples)
        (x_(static_cast<Eigen::Index>(s), split.feature) <= split.threshold ? left : right).push_back(s);
      const auto left_id = nodes.size();
      nodes.emplace_back();
      nodes.emplace_back();
      nodes[p.node].feature = split.feature;
      nodes[p.node].threshold = split.threshold;
      nodes[p.node].left = static_cast<int>(left_id);
      nodes[p.node].right = static_cast<int>(left_id + 1);
      // right pushed first so the left subtree is expanded first
      stack.push_back({left_id + 1, p.depth + 1, std::move(right)});
      stack.push_back({left_id, p.depth + 1, std::move(left)});
    }
    return nodes;
  }

 private:
  std::vector<std::uint32_t> histogram(const std::vector<std::size_t>& samples) const {
    std::vector<std::uint32_t> h(static_cast<std::size_t>(class_count_), 0);
    for (auto s : samples) ++h[static_cast<std::size_t>(y_[s])];
    return h;
  }

  // Features are drawn without replacement until `quota_` of them vary
  // within the node (or every feature has been drawn).
  Candidate best_split(const std::vector<std::size_t>& samples) {
    Candidate best;
    int usable = 0;
    for (std::size_t drawn = 0; drawn < features_.size() && usable < quota_; ++drawn) {
      const auto j = drawn + static_cast<std::size_t>(uniform_below(rng_, features_.size() - drawn));
      std::swap(features_[drawn], features_[j]);
      const int f = features_[drawn];
      column_.clear();
      for (auto s : samples) column_.emplace_back(x_(static_cast<Eigen::Index>(s), f), y_[s]);
      const auto [lo, hi] = std::minmax_element(column_.begin(), column_.end());
      if (lo->first == hi->first) continue;
      ++usable;
      const Candidate c = best_threshold(f);
      if (prefer(c, best)) best = c;
    }
    return best;
  }

  Candidate best_threshold(int feature) {
    std::sort(column_.begin(), column_.end());
    const std::size_t n = column_.size();
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);
    std::vector<std::uint64_t> left(static_cast<std::size_t>(class_count_), 0), right(left);
    for (const auto& [v, c] : column_) ++right[static_cast<std::size_t>(c)];
    std::uint64_t left_sq = 0, right_sq = 0;
    for (auto r : right) right_sq += r * r;

    Candidate best;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(column_[i].second);
      left_sq += 2 * left[c] + 1;
      right_sq -= 2 * right[c] - 1;
      ++left[c];
      --right[c];
      if (column_[i].first == column_[i + 1].first) continue;
      const std::size_t n_left = i + 1;
      if (n_left < min_leaf || n - n_left < min_leaf) continue;
      Candidate cand{true, SplitScore{left_sq, right_sq, n_left, n - n_left}, feature,
                     0.5 * (column_[i].first + column_[i + 1].first)};
      // thresholds increase along the sweep, so only a strictly better score wins
      if (!best.valid || better(cand.score, best.score)) best = cand;
    }
    return best;
  }

  const MatrixXd& x_;
  const std::vector<ClassIndex>& y_;
  int class_count_;
  const ForestConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<int> features_;
  std::vector<std::pair<double, ClassIndex>> column_;
  int quota_;
};

}  // namespace

DecisionTree fit_tree(const MatrixXd& features, const std::vector<ClassIndex>& labels,
                      const std::vector<std::size_t>& samples, int class_count, const ForestConfig& cfg,
                      std::uint64_t feature_order_seed) {
  if (samples.empty()) throw std::invalid_argument("cannot fit a tree on zero samples");
  TreeBuilder builder(features, labels, class_count, cfg, feature_order_seed);
  return DecisionTree(builder.build(samples), class_count);
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, ForestConfig cfg, int class_count, int feature_dim)
    : trees_(std::move(trees)), cfg_(cfg), class_count_(class_count), feature_dim_(feature_dim) {
  if (trees_.empty()) throw std::invalid_argument("forest needs at least one tree");
  for (const auto& t : trees_)
    if (t.class_count() != class_count_) throw std::invalid_argument("tree class_count mismatch");
}

VectorXd RandomForest::predict_proba(const VectorXd& v) const {
  check_dim(v);
  VectorXd p = VectorXd::Zero(class_count_);
  for (const auto& t : trees_) p += t.distribution(v);
  return p / static_cast<double>(trees_.size());
}

RandomForest fit_forest(const Dataset& d, const ForestConfig& cfg) {
  if (d.empty()) throw std::invalid_argument("cannot fit a forest on an empty dataset");
  if (cfg.tree_count < 1) throw std::invalid_argument("tree count must be >= 1");
  if (cfg.max_depth < 0 || cfg.min_samples_leaf < 1) throw std::invalid_argument("bad depth or leaf size");
  const auto dim = static_cast<int>(d.feature_dim());
  if (cfg.features_per_split > dim)
    throw std::invalid_argument("features_per_split " + std::to_string(cfg.features_per_split) +
                                " exceeds feature dimension " + std::to_string(dim));

  const MatrixXd x = feature_matrix(d);
  const auto y = labels_of(d);
  std::vector<DecisionTree> trees(static_cast<std::size_t>(cfg.tree_count));
  parallel_for(trees.size(), [&](std::size_t t) {
    const std::uint64_t tree_seed = splitmix64(cfg.seed ^ splitmix64(t + 1));
    std::mt19937_64 rng(tree_seed);
    std::vector<std::size_t> bootstrap(d.size());
    for (auto& s : bootstrap) s = static_cast<std::size_t>(uniform_below(rng, d.size()));
    trees[t] = fit_tree(x, y, bootstrap, d.class_count, cfg, splitmix64(tree_seed));
  });
  return RandomForest(std::move(trees), cfg, d.class_count, dim);
}

// ---------------------------------------------------------------------------
// k-NN

KnnVerifier::KnnVerifier(const Dataset& train, int neighbors)
    : points_(feature_matrix(train)), labels_(labels_of(train)), neighbors_(neighbors), class_count_(train.class_count) {
  if (train.empty()) throw std::invalid_argument("k-NN needs a nonempty training set");
  if (neighbors < 1 || static_cast<std::size_t>(neighbors) > train.size())
    throw std::invalid_argument("neighbors must be in [1, |train|]");
}

VectorXd KnnVerifier::predict_proba(const VectorXd& v) const {
  check_dim(v);
  const VectorXd dist = (points_.rowwise() - v.transpose()).rowwise().squaredNorm();
  std::vector<std::size_t> idx(labels_.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto k = static_cast<std::ptrdiff_t>(neighbors_);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](std::size_t a, std::size_t b) {
    const auto da = dist[static_cast<Eigen::Index>(a)], db = dist[static_cast<Eigen::Index>(b)];
    return da < db || (da == db && a < b);
  });
  VectorXd votes = VectorXd::Zero(class_count_);
  for (std::ptrdiff_t i = 0; i < k; ++i) votes[labels_[idx[static_cast<std::size_t>(i)]]] += 1.0;
  return votes / static_cast<double>(neighbors_);
}

std::vector<ClassIndex> knn_top_k(const Dataset& train, const VectorXd& v, int neighbors, int k) {
  return KnnVerifier(train, neighbors).top_k(v, k);
}

}  // namespace advaware
