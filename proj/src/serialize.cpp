#include "advaware/serialize.hpp"

#include <fstream>

namespace advaware {

using nlohmann::json;

void to_json(json& j, const AttackConfig& cfg) {
  j = json{{"method", std::string(to_string(cfg.method))},
           {"epsilon", cfg.epsilon},
           {"alpha", cfg.alpha},
           {"steps", cfg.steps},
           {"overshoot", cfg.overshoot},
           {"c", cfg.c},
           {"kappa", cfg.kappa},
           {"lr", cfg.lr}};
}

void from_json(const json& j, AttackConfig& cfg) {
  cfg = AttackConfig::defaults(parse_attack_method(j.at("method").get<std::string>()));
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.overshoot = j.value("overshoot", cfg.overshoot);
  cfg.c = j.value("c", cfg.c);
  cfg.kappa = j.value("kappa", cfg.kappa);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.validate();
}

void to_json(json& j, const ForestConfig& cfg) {
  j = json{{"tree_count", cfg.tree_count},
           {"max_depth", cfg.max_depth},
           {"features_per_split", cfg.features_per_split},
           {"min_samples_leaf", cfg.min_samples_leaf},
           {"seed", cfg.seed}};
}

void from_json(const json& j, ForestConfig& cfg) {
  cfg.tree_count = j.at("tree_count").get<int>();
  cfg.max_depth = j.at("max_depth").get<int>();
  cfg.features_per_split = j.at("features_per_split").get<int>();
  cfg.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
}

json net_to_json(const NeuralNet<double>& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", l.activation == Activation::relu ? "relu" : "identity"},
                      {"weights", std::move(w)},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", "advaware.neuralnet"},
          {"version", 1},
          {"input_dim", net.input_dim()},
          {"class_count", net.class_count()},
          {"layers", std::move(layers)}};
}

NeuralNet<double> net_from_json(const json& j) {
  if (j.value("format", "") != "advaware.neuralnet" || j.value("version", 0) != 1)
    throw FormatError("not a version-1 advaware.neuralnet document");
  std::vector<DenseLayer<double>> layers;
  for (const auto& lj : j.at("layers")) {
    const int in = lj.at("in").get<int>(), out = lj.at("out").get<int>();
    const auto w = lj.at("weights").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out))
      throw FormatError("layer array sizes do not match declared dims");
    const auto act = lj.at("activation").get<std::string>();
    if (act != "relu" && act != "identity") throw FormatError("unknown activation '" + act + "'");
    DenseLayer<double> l;
    l.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), out, in);
    l.bias = Eigen::Map<const VectorXd>(b.data(), out);
    l.activation = act == "relu" ? Activation::relu : Activation::identity;
    layers.push_back(std::move(l));
  }
  NeuralNet<double> net(std::move(layers));
  if (net.input_dim() != j.at("input_dim").get<int>() || net.class_count() != j.at("class_count").get<int>())
    throw FormatError("declared input_dim/class_count disagree with layers");
  return net;
}

json forest_to_json(const RandomForest& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees()) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    json leaves = json::array();
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const auto& n = t.nodes()[i];
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      if (n.is_leaf()) {
        std::vector<std::uint32_t> sparse;
        for (std::size_t c = 0; c < n.histogram.size(); ++c)
          if (n.histogram[c] > 0) {
            sparse.push_back(static_cast<std::uint32_t>(c));
            sparse.push_back(n.histogram[c]);
          }
        leaves.push_back(json::array({i, sparse}));
      }
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"leaves", leaves}});
  }
  return {{"format", "advaware.forest"},
          {"version", 1},
          {"config", forest.config()},
          {"class_count", forest.class_count()},
          {"feature_dim", forest.feature_dim()},
          {"trees", std::move(trees)}};
}

RandomForest forest_from_json(const json& j) {
  if (j.value("format", "") != "advaware.forest" || j.value("version", 0) != 1)
    throw FormatError("not a version-1 advaware.forest document");
  const int class_count = j.at("class_count").get<int>();
  const int dim = j.at("feature_dim").get<int>();
  std::vector<DecisionTree> trees;
  for (const auto& tj : j.at("trees")) {
    const auto feature = tj.at("feature").get<std::vector<int>>();
    const auto threshold = tj.at("threshold").get<std::vector<double>>();
    const auto left = tj.at("left").get<std::vector<int>>();
    const auto right = tj.at("right").get<std::vector<int>>();
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n)
      throw FormatError("tree arrays have inconsistent lengths");
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = TreeNode{feature[i], threshold[i], left[i], right[i], {}};
      if (feature[i] >= dim) throw FormatError("feature index exceeds feature_dim");
      if (feature[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                              left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n)))
        throw FormatError("child index out of range");
    }
    for (const auto& leaf : tj.at("leaves")) {
      const auto node = leaf.at(0).get<std::size_t>();
      const auto sparse = leaf.at(1).get<std::vector<std::uint32_t>>();
      if (node >= n || !nodes[node].is_leaf() || sparse.size() % 2 != 0) throw FormatError("bad leaf entry");
      auto& h = nodes[node].histogram;
      h.assign(static_cast<std::size_t>(class_count), 0);
      for (std::size_t k = 0; k < sparse.size(); k += 2) {
        if (sparse[k] >= static_cast<std::uint32_t>(class_count)) throw FormatError("leaf class out of range");
        h[sparse[k]] = sparse[k + 1];
      }
    }
    for (const auto& node : nodes)
      if (node.is_leaf() && node.histogram.empty()) throw FormatError("leaf without histogram");
    trees.emplace_back(std::move(nodes), class_count);
  }
  return RandomForest(std::move(trees), j.at("config").get<ForestConfig>(), class_count, dim);
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace advaware
