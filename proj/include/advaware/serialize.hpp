#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "advaware/attacks.hpp"
#include "advaware/neuralnet.hpp"
#include "advaware/secondary.hpp"

namespace advaware {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void to_json(nlohmann::json& j, const AttackConfig& cfg);
void from_json(const nlohmann::json& j, AttackConfig& cfg);
void to_json(nlohmann::json& j, const ForestConfig& cfg);
void from_json(const nlohmann::json& j, ForestConfig& cfg);

// Network document: {"format": "advaware.neuralnet", "version": 1, "input_dim",
// "class_count", "layers": [{"in", "out", "activation", "weights" (row-major), "bias"}]}
nlohmann::json net_to_json(const NeuralNet<double>& net);
NeuralNet<double> net_from_json(const nlohmann::json& j);

// Forest document: {"format": "advaware.forest", "version": 1, "config", "class_count",
// "feature_dim", "trees": [{"feature", "threshold", "left", "right", "leaves"}]}
// where "leaves" lists [node, [class, count, class, count, ...]] for every leaf.
nlohmann::json forest_to_json(const RandomForest& forest);
RandomForest forest_from_json(const nlohmann::json& j);

/// Pretty-printed with a trailing newline. Output is byte-stable for equal documents.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace advaware
