#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "advaware/adaptive.hpp"
#include "advaware/attacks.hpp"
#include "advaware/data.hpp"
#include "advaware/neuralnet.hpp"
#include "advaware/pipeline.hpp"
#include "advaware/secondary.hpp"

namespace advaware {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string format = "idx";  // idx | cifar10 | cifar100_fine | cifar100_coarse
  std::vector<std::filesystem::path> train_paths;  // idx: {images, labels}
  std::vector<std::filesystem::path> test_paths;
  std::size_t train_size = 0;  // 0 keeps the whole split
  std::size_t test_size = 0;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct NetSpec {
  std::vector<int> hidden{256, 128};
  TrainConfig train;
};

struct VerifierSpec {
  std::string kind = "forest";  // forest | knn
  ForestConfig forest;
  int neighbors = 5;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  NetSpec net;
  VerifierSpec verifier;
  std::vector<AttackConfig> attacks;
  CostProfile profile = builtin_profiles().front();
  std::vector<int> k_range;  // empty: 1..class_count
  int detect_k = 1;
  std::filesystem::path output_dir = "out";

  /// Parses a YAML document. Relative paths resolve against base_dir.
  /// `overrides` are dotted keys (e.g. "net.epochs") with YAML scalar or
  /// flow values, applied before validation.
  static ExperimentConfig parse(const std::string& yaml_text, const std::filesystem::path& base_dir,
                                const std::vector<std::pair<std::string, std::string>>& overrides = {});
  static ExperimentConfig load(const std::filesystem::path& path,
                               const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

/// Stages in pipeline order.
enum class Stage { train_dnn, train_verifier, attack, categorize, detect, sweep_k, optimize, report };

std::string_view to_string(Stage s);
const std::vector<Stage>& all_stages();

/// Thrown when a stage fails; carries the stage so the CLI can report it.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& cause)
      : std::runtime_error(std::string(to_string(stage)) + ": " + cause), stage_(stage) {}
  [[nodiscard]] Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// Output directory layout:
///   manifest.json
///   models/net.json, models/training.json, models/verifier.json
///   attacks/<method>.attempts.{json,bin}, attacks/<method>.sets.{json,bin}
///   reports/sweep_<method>.csv, accuracy.csv, auc.csv, attacks.csv,
///           detect_<method>.csv, summary.json
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  void run_stage(Stage s);
  void run_all();

  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }
  [[nodiscard]] std::filesystem::path dir() const { return cfg_.output_dir; }

  const Dataset& train_set();
  const Dataset& test_set();

 private:
  void train_dnn();
  void train_verifier();
  void attack();
  void categorize_stage();
  void detect();
  void sweep_k();
  void optimize();
  void report();

  const NeuralNet<double>& net();
  const Verifier& verifier();
  const CategorizedSets& sets_for(std::size_t attack_index);
  const SetScores& scores_for(std::size_t attack_index);
  [[nodiscard]] std::vector<int> k_range();
  [[nodiscard]] std::string attack_stem(std::size_t attack_index) const;

  void write_manifest(bool complete, const std::optional<std::string>& failure);

  ExperimentConfig cfg_;
  std::optional<Dataset> train_;
  std::optional<Dataset> test_;
  std::map<std::string, std::string> stage_status_;
  std::optional<NeuralNet<double>> net_;
  std::unique_ptr<Verifier> verifier_;
  std::map<std::size_t, CategorizedSets> sets_;
  std::map<std::size_t, SetScores> scores_;
};

}  // namespace advaware
