#include "advaware/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "advaware/metrics.hpp"
#include "advaware/serialize.hpp"

namespace advaware {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

void apply_override(YAML::Node root, const std::string& key, const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override key");
  // Walk with fresh handles; YAML::Node assignment would rebind, not copy.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = chain.back()[parts[i]];
    if (child.IsDefined() && !child.IsMap()) throw ConfigError("override key '" + key + "' crosses a non-map value");
    chain.push_back(child);
  }
  chain.back()[parts.back()] = YAML::Load(value);
}

template <typename T>
T required(const YAML::Node& n, const std::string& key, const std::string& where) {
  if (!n[key]) throw ConfigError(where + "." + key + " is required");
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T optional(const YAML::Node& n, const std::string& key, T fallback) {
  if (!n || !n[key]) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<fs::path> paths(const YAML::Node& n, const std::string& key, const fs::path& base) {
  if (!n[key]) throw ConfigError("dataset." + key + " is required");
  std::vector<fs::path> out;
  if (n[key].IsScalar()) {
    out.push_back(n[key].as<std::string>());
  } else {
    for (const auto& p : n[key]) out.push_back(p.as<std::string>());
  }
  for (auto& p : out)
    if (p.is_relative()) p = base / p;
  return out;
}

CostProfile parse_profile(const YAML::Node& n) {
  if (!n) return builtin_profiles().front();
  if (n.IsScalar()) return builtin_profile(n.as<std::string>());
  CostProfile p{optional<std::string>(n, "name", "custom"),
                required<double>(n, "ca", "profile"),
                required<double>(n, "cb", "profile"),
                required<double>(n, "cc", "profile"),
                required<double>(n, "cd", "profile"),
                required<double>(n, "ce", "profile"),
                required<double>(n, "cf", "profile")};
  p.validate();
  return p;
}

AttackConfig parse_attack(const YAML::Node& n) {
  AttackConfig a = AttackConfig::defaults(parse_attack_method(required<std::string>(n, "method", "attacks[]")));
  a.epsilon = optional(n, "epsilon", a.epsilon);
  a.alpha = optional(n, "alpha", a.alpha);
  a.steps = optional(n, "steps", a.steps);
  a.overshoot = optional(n, "overshoot", a.overshoot);
  a.c = optional(n, "c", a.c);
  a.kappa = optional(n, "kappa", a.kappa);
  a.lr = optional(n, "lr", a.lr);
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("attack ") + std::string(to_string(a.method)) + ": " + e.what());
  }
  return a;
}

std::vector<int> parse_k_range(const YAML::Node& n) {
  if (!n) return {};
  std::vector<int> ks;
  if (n.IsMap()) {
    const int from = required<int>(n, "from", "k_range"), to = required<int>(n, "to", "k_range");
    for (int k = from; k <= to; ++k) ks.push_back(k);
  } else if (n.IsSequence()) {
    ks = n.as<std::vector<int>>();
  } else if (n.as<std::string>() != "all") {
    throw ConfigError("k_range must be a list, {from, to} or 'all'");
  }
  if (n.IsDefined() && !n.IsScalar() && ks.empty()) throw ConfigError("k_range is empty");
  return ks;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& yaml_text, const fs::path& base_dir,
                                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
    if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    for (const auto& [k, v] : overrides) apply_override(root, k, v);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  const YAML::Node data = root["dataset"];
  if (!data) throw ConfigError("dataset section is required");
  cfg.dataset.format = optional<std::string>(data, "format", "idx");
  cfg.dataset.train_paths = paths(data, "train", base_dir);
  cfg.dataset.test_paths = paths(data, "test", base_dir);
  cfg.dataset.train_size = optional<std::size_t>(data, "train_size", 0);
  cfg.dataset.test_size = optional<std::size_t>(data, "test_size", 0);
  cfg.dataset.stratified = optional(data, "stratified", true);
  cfg.dataset.seed = required<std::uint64_t>(data, "seed", "dataset");
  if (cfg.dataset.format == "idx" && (cfg.dataset.train_paths.size() != 2 || cfg.dataset.test_paths.size() != 2))
    throw ConfigError("idx datasets need [images, labels] path pairs");
  if (cfg.dataset.format != "idx" && cfg.dataset.format != "cifar10" && cfg.dataset.format != "cifar100_fine" &&
      cfg.dataset.format != "cifar100_coarse")
    throw ConfigError("unknown dataset format '" + cfg.dataset.format + "'");

  const YAML::Node net = root["net"];
  if (!net) throw ConfigError("net section is required");
  cfg.net.hidden = optional(net, "hidden", cfg.net.hidden);
  cfg.net.train.learning_rate = optional(net, "learning_rate", cfg.net.train.learning_rate);
  cfg.net.train.epochs = optional(net, "epochs", cfg.net.train.epochs);
  cfg.net.train.batch_size = optional(net, "batch_size", cfg.net.train.batch_size);
  cfg.net.train.seed = required<std::uint64_t>(net, "seed", "net");
  for (int h : cfg.net.hidden)
    if (h < 1) throw ConfigError("net.hidden sizes must be positive");

  const YAML::Node ver = root["verifier"];
  if (!ver) throw ConfigError("verifier section is required");
  cfg.verifier.kind = optional<std::string>(ver, "kind", "forest");
  if (cfg.verifier.kind != "forest" && cfg.verifier.kind != "knn")
    throw ConfigError("verifier.kind must be forest or knn");
  cfg.verifier.forest.tree_count = optional(ver, "trees", cfg.verifier.forest.tree_count);
  cfg.verifier.forest.max_depth = optional(ver, "max_depth", cfg.verifier.forest.max_depth);
  cfg.verifier.forest.features_per_split = optional(ver, "features_per_split", cfg.verifier.forest.features_per_split);
  cfg.verifier.forest.min_samples_leaf = optional(ver, "min_samples_leaf", cfg.verifier.forest.min_samples_leaf);
  cfg.verifier.forest.seed = required<std::uint64_t>(ver, "seed", "verifier");
  cfg.verifier.neighbors = optional(ver, "neighbors", cfg.verifier.neighbors);

  if (const YAML::Node attacks = root["attacks"]) {
    if (!attacks.IsSequence() && !attacks.IsNull()) throw ConfigError("attacks must be a list");
    for (const auto& a : attacks) cfg.attacks.push_back(parse_attack(a));
  }
  cfg.profile = parse_profile(root["profile"]);
  cfg.k_range = parse_k_range(root["k_range"]);
  cfg.detect_k = optional(root, "detect_k", 1);
  cfg.output_dir = optional<std::string>(root, "output_dir", "out");
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path,
                                        const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse(text.str(), path.has_parent_path() ? path.parent_path() : fs::path("."), overrides);
}

namespace {

// Echo of the configuration for the manifest. Paths are kept as written
// relative to nothing in particular, so the output directory is left out.
json config_echo(const ExperimentConfig& c) {
  std::vector<std::string> train, test;
  for (const auto& p : c.dataset.train_paths) train.push_back(p.filename().string());
  for (const auto& p : c.dataset.test_paths) test.push_back(p.filename().string());
  json attacks = json::array();
  for (const auto& a : c.attacks) attacks.push_back(a);
  return {{"dataset",
           {{"format", c.dataset.format},
            {"train", train},
            {"test", test},
            {"train_size", c.dataset.train_size},
            {"test_size", c.dataset.test_size},
            {"stratified", c.dataset.stratified},
            {"seed", c.dataset.seed}}},
          {"net",
           {{"hidden", c.net.hidden},
            {"learning_rate", c.net.train.learning_rate},
            {"epochs", c.net.train.epochs},
            {"batch_size", c.net.train.batch_size},
            {"seed", c.net.train.seed}}},
          {"verifier", {{"kind", c.verifier.kind}, {"forest", c.verifier.forest}, {"neighbors", c.verifier.neighbors}}},
          {"attacks", attacks},
          {"profile",
           {{"name", c.profile.name},
            {"ca", c.profile.ca},
            {"cb", c.profile.cb},
            {"cc", c.profile.cc},
            {"cd", c.profile.cd},
            {"ce", c.profile.ce},
            {"cf", c.profile.cf}}},
          {"k_range", c.k_range},
          {"detect_k", c.detect_k}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::train_dnn: return "train-dnn";
    case Stage::train_verifier: return "train-verifier";
    case Stage::attack: return "attack";
    case Stage::categorize: return "categorize";
    case Stage::detect: return "detect";
    case Stage::sweep_k: return "sweep-k";
    case Stage::optimize: return "optimize";
    case Stage::report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::train_dnn, Stage::train_verifier, Stage::attack,   Stage::categorize,
                                         Stage::detect,    Stage::sweep_k,        Stage::optimize, Stage::report};
  return stages;
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  for (Stage s : all_stages()) stage_status_[std::string(to_string(s))] = "pending";
  const auto manifest = dir() / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      const auto doc = read_json_file(manifest);
      for (const auto& [name, status] : doc.at("stages").items())
        if (stage_status_.contains(name)) stage_status_[name] = status.get<std::string>();
    } catch (const std::exception&) {
      // an unreadable manifest is simply rewritten
    }
  }
}

const Dataset& Experiment::train_set() {
  if (!train_) {
    const auto& spec = cfg_.dataset;
    Dataset d = spec.format == "idx"
                    ? load_idx(spec.train_paths[0], spec.train_paths[1], Split::train)
                    : load_cifar_binary(spec.train_paths,
                                        spec.format == "cifar10"         ? CifarLabelMode::cifar10
                                        : spec.format == "cifar100_fine" ? CifarLabelMode::cifar100_fine
                                                                         : CifarLabelMode::cifar100_coarse,
                                        Split::train);
    if (spec.train_size > 0) d = subsample(d, spec.train_size, spec.seed, spec.stratified);
    train_ = std::move(d);
  }
  return *train_;
}

const Dataset& Experiment::test_set() {
  if (!test_) {
    const auto& spec = cfg_.dataset;
    Dataset d = spec.format == "idx"
                    ? load_idx(spec.test_paths[0], spec.test_paths[1], Split::test)
                    : load_cifar_binary(spec.test_paths,
                                        spec.format == "cifar10"         ? CifarLabelMode::cifar10
                                        : spec.format == "cifar100_fine" ? CifarLabelMode::cifar100_fine
                                                                         : CifarLabelMode::cifar100_coarse,
                                        Split::test);
    // the training split may reveal more classes than a small test split
    d.class_count = std::max(d.class_count, train_set().class_count);
    if (spec.test_size > 0) d = subsample(d, spec.test_size, splitmix64(spec.seed), spec.stratified);
    test_ = std::move(d);
  }
  return *test_;
}

std::vector<int> Experiment::k_range() {
  const int classes = test_set().class_count;
  if (cfg_.k_range.empty()) return full_k_range(classes);
  for (int k : cfg_.k_range)
    if (k < 1 || k > classes) throw ConfigError("k_range value " + std::to_string(k) + " outside [1, class_count]");
  return cfg_.k_range;
}

std::string Experiment::attack_stem(std::size_t i) const {
  const auto method = cfg_.attacks.at(i).method;
  const auto same = std::count_if(cfg_.attacks.begin(), cfg_.attacks.end(), [&](const auto& a) { return a.method == method; });
  std::string stem(to_string(method));
  return same > 1 ? stem + "_" + std::to_string(i) : stem;
}

const NeuralNet<double>& Experiment::net() {
  if (!net_) net_ = net_from_json(read_json_file(dir() / "models" / "net.json"));
  return *net_;
}

const Verifier& Experiment::verifier() {
  if (!verifier_) {
    const auto doc = read_json_file(dir() / "models" / "verifier.json");
    if (doc.value("format", "") == "advaware.knn") {
      if (doc.value("version", 0) != 1) throw FormatError("unsupported k-NN document version");
      if (doc.at("train_size").get<std::size_t>() != train_set().size())
        throw FormatError("k-NN document does not match the configured training set");
      verifier_ = std::make_unique<KnnVerifier>(train_set(), doc.at("neighbors").get<int>());
    } else {
      verifier_ = std::make_unique<RandomForest>(forest_from_json(doc));
    }
  }
  return *verifier_;
}

const CategorizedSets& Experiment::sets_for(std::size_t i) {
  auto it = sets_.find(i);
  if (it == sets_.end())
    it = sets_.emplace(i, load_sets(dir() / "attacks" / (attack_stem(i) + ".sets.json"), test_set())).first;
  return it->second;
}

const SetScores& Experiment::scores_for(std::size_t i) {
  auto it = scores_.find(i);
  if (it == scores_.end()) it = scores_.emplace(i, score_sets(sets_for(i), net(), verifier())).first;
  return it->second;
}

void Experiment::train_dnn() {
  const Dataset& train = train_set();
  std::vector<int> dims{static_cast<int>(train.feature_dim())};
  dims.insert(dims.end(), cfg_.net.hidden.begin(), cfg_.net.hidden.end());
  dims.push_back(std::max(train.class_count, test_set().class_count));
  auto model = NeuralNet<double>::make(dims, cfg_.net.train.seed);
  const auto result = advaware::train(model, train, cfg_.net.train);
  write_json_file(net_to_json(model), dir() / "models" / "net.json");
  write_json_file({{"epoch_loss", result.epoch_loss},
                   {"train_accuracy", accuracy(model, train)},
                   {"test_accuracy", accuracy(model, test_set())}},
                  dir() / "models" / "training.json");
  net_ = std::move(model);
  sets_.clear();
  scores_.clear();
}

void Experiment::train_verifier() {
  const Dataset& train = train_set();
  if (cfg_.verifier.kind == "knn") {
    verifier_ = std::make_unique<KnnVerifier>(train, cfg_.verifier.neighbors);
    write_json_file({{"format", "advaware.knn"},
                     {"version", 1},
                     {"neighbors", cfg_.verifier.neighbors},
                     {"class_count", train.class_count},
                     {"train_size", train.size()}},
                    dir() / "models" / "verifier.json");
  } else {
    auto forest = fit_forest(train, cfg_.verifier.forest);
    write_json_file(forest_to_json(forest), dir() / "models" / "verifier.json");
    verifier_ = std::make_unique<RandomForest>(std::move(forest));
  }
  scores_.clear();
}

void Experiment::attack() {
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
    const auto attempts = attack_all(test_set(), net(), cfg_.attacks[i]);
    save_attempts(attempts, cfg_.attacks[i], test_set().size(), dir() / "attacks", attack_stem(i) + ".attempts");
  }
  sets_.clear();
  scores_.clear();
}

void Experiment::categorize_stage() {
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
    AttackConfig recorded;
    const auto attempts = load_attempts(dir() / "attacks" / (attack_stem(i) + ".attempts.json"), test_set(), &recorded);
    if (!(recorded == cfg_.attacks[i]))
      throw std::runtime_error("recorded attack parameters differ from the config; rerun the attack stage");
    auto sets = partition(test_set(), attempts, recorded);
    save_sets(sets, dir() / "attacks", attack_stem(i) + ".sets");
    sets_[i] = std::move(sets);
    scores_.erase(i);
  }
}

void Experiment::detect() {
  const int k = cfg_.detect_k;
  if (k < 1 || k > verifier().class_count()) throw ConfigError("detect_k outside [1, class_count]");
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
    const auto& sets = sets_for(i);
    const auto& scores = scores_for(i);
    struct Row {
      std::size_t index;
      SetKind set;
      ClassIndex label, prediction;
      int score;
    };
    std::vector<Row> rows;
    for (std::size_t j = 0; j < sets.set_crc.size(); ++j)
      rows.push_back({sets.set_crc[j].index, SetKind::crc, sets.set_crc[j].label, sets.set_crc[j].prediction, scores.crc[j]});
    for (std::size_t j = 0; j < sets.set_mis.size(); ++j)
      rows.push_back({sets.set_mis[j].index, SetKind::mis, sets.set_mis[j].label, sets.set_mis[j].prediction, scores.mis[j]});
    for (std::size_t j = 0; j < sets.set_adv.size(); ++j)
      rows.push_back({sets.set_adv[j].index, SetKind::adv, sets.set_adv[j].label,
                      net().predict(sets.set_adv[j].example.perturbed), scores.adv[j]});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.index < b.index; });

    ReportTable t{{"index", "set", "label", "prediction", "score", "forged", "decision"}, {}};
    for (const auto& r : rows) {
      const bool forged = r.score > k;
      const Verdict v{forged, forged ? std::nullopt : std::optional<ClassIndex>(r.prediction)};
      t.rows.push_back({std::to_string(r.index), std::string(to_string(r.set)), std::to_string(r.label),
                        std::to_string(r.prediction), std::to_string(r.score), forged ? "true" : "false",
                        "Dec_" + std::string(to_string(decision_of(r.set, v)))});
    }
    write_csv(t, dir() / "reports" / ("detect_" + attack_stem(i) + ".csv"));
  }
}

void Experiment::sweep_k() {
  const auto ks = k_range();
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i)
    write_csv(sweep_table(scores_for(i), cfg_.profile, ks), dir() / "reports" / ("sweep_" + attack_stem(i) + ".csv"));
}

void Experiment::optimize() {
  const auto ks = k_range();
  std::vector<CostProfile> profiles = builtin_profiles();
  const bool is_builtin = std::any_of(profiles.begin(), profiles.end(), [&](const CostProfile& p) {
    return p.name == cfg_.profile.name && p.ca == cfg_.profile.ca && p.cb == cfg_.profile.cb &&
           p.cc == cfg_.profile.cc && p.cd == cfg_.profile.cd && p.ce == cfg_.profile.ce && p.cf == cfg_.profile.cf;
  });
  if (!is_builtin) profiles.push_back(cfg_.profile);

  ReportTable t{{"attack", "profile", "k_star", "f", "N_a", "N_b", "N_c", "N_d", "N_e", "N_f", "acc_with", "acc_without"},
                {}};
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
    const auto& scores = scores_for(i);
    for (const auto& profile : profiles) {
      const auto best = optimal_k(scores, profile, ks);
      const auto& row = *std::find_if(best.table.begin(), best.table.end(), [&](const SweepRow& r) { return r.k == best.k; });
      const auto& n = row.counts;
      auto acc = [&](bool include) {
        const std::uint64_t denom = include ? n.total() : n.a + n.c + n.d + n.f;
        return denom == 0 ? std::string() : format_number(system_accuracy(n, include));
      };
      t.rows.push_back({attack_stem(i), profile.name, std::to_string(best.k), format_number(row.f), std::to_string(n.a),
                        std::to_string(n.b), std::to_string(n.c), std::to_string(n.d), std::to_string(n.e),
                        std::to_string(n.f), acc(true), acc(false)});
    }
  }
  write_csv(t, dir() / "reports" / "accuracy.csv");
}

void Experiment::report() {
  const Dataset& test = test_set();
  ReportTable auc{{"attack", "n_clean", "n_adv", "auc_rank", "auc_top1"}, {}};
  ReportTable attacks{{"attack", "method", "epsilon", "alpha", "steps", "overshoot", "c", "kappa", "lr", "attempts",
                       "successes", "success_ratio", "set_crc", "set_mis", "set_adv"},
                      {}};
  json per_attack = json::array();
  for (std::size_t i = 0; i < cfg_.attacks.size(); ++i) {
    const auto& sets = sets_for(i);
    const auto& scores = scores_for(i);
    const auto& a = cfg_.attacks[i];
    const bool separable = !scores.adv.empty() && !scores.crc.empty();
    const std::string auc_rank = separable ? format_number(roc_auc(clean_vs_adversarial(scores))) : "";
    const std::string auc_top1 = separable ? format_number(detector_auc(scores, 1)) : "";
    auc.rows.push_back({attack_stem(i), std::to_string(scores.crc.size()), std::to_string(scores.adv.size()), auc_rank,
                        auc_top1});
    const std::size_t attempts = sets.set_crc.size() + sets.set_adv.size();
    const std::string ratio = attempts ? format_number(attack_success_ratio(sets)) : "";
    attacks.rows.push_back({attack_stem(i), std::string(to_string(a.method)), format_number(a.epsilon),
                            format_number(a.alpha), std::to_string(a.steps), format_number(a.overshoot),
                            format_number(a.c), format_number(a.kappa), format_number(a.lr), std::to_string(attempts),
                            std::to_string(sets.set_adv.size()), ratio, std::to_string(sets.set_crc.size()),
                            std::to_string(sets.set_mis.size()), std::to_string(sets.set_adv.size())});

    // verifier top-1 on the attacked images versus their clean originals
    std::size_t clean_hits = 0, adv_hits = 0;
    for (const auto& s : sets.set_adv) {
      clean_hits += verifier().predict(s.example.original) == s.label;
      adv_hits += verifier().predict(s.example.perturbed) == s.label;
    }
    per_attack.push_back({{"attack", attack_stem(i)},
                          {"success_ratio", ratio},
                          {"set_crc", sets.set_crc.size()},
                          {"set_mis", sets.set_mis.size()},
                          {"set_adv", sets.set_adv.size()},
                          {"auc_rank", auc_rank},
                          {"auc_top1", auc_top1},
                          {"verifier_top1_on_adv_clean", clean_hits},
                          {"verifier_top1_on_adv_perturbed", adv_hits}});
  }
  write_csv(auc, dir() / "reports" / "auc.csv");
  write_csv(attacks, dir() / "reports" / "attacks.csv");

  json summary = {{"format", "advaware.summary"},
                  {"version", 1},
                  {"accuracy_definition", "v1: good decisions (a, b, c) over all decisions; without misclassified "
                                          "samples: (a + c) / (a + c + d + f)"},
                  {"train_size", train_set().size()},
                  {"test_size", test.size()},
                  {"class_count", test.class_count},
                  {"net_clean_accuracy", format_number(accuracy(net(), test))},
                  {"verifier_clean_top1_accuracy", format_number(accuracy(verifier(), test))},
                  {"profile", cfg_.profile.name},
                  {"attacks", per_attack}};
  write_json_file(summary, dir() / "reports" / "summary.json");
}

void Experiment::run_stage(Stage s) {
  const std::string name(to_string(s));
  stage_status_[name] = "incomplete";
  write_manifest(false, std::nullopt);
  try {
    switch (s) {
      case Stage::train_dnn: train_dnn(); break;
      case Stage::train_verifier: train_verifier(); break;
      case Stage::attack: attack(); break;
      case Stage::categorize: categorize_stage(); break;
      case Stage::detect: detect(); break;
      case Stage::sweep_k: sweep_k(); break;
      case Stage::optimize: optimize(); break;
      case Stage::report: report(); break;
    }
  } catch (const std::exception& e) {
    write_manifest(false, name + ": " + e.what());
    throw StageError(s, e.what());
  }
  stage_status_[name] = "complete";
  const bool all_done = std::all_of(stage_status_.begin(), stage_status_.end(),
                                    [](const auto& kv) { return kv.second == "complete"; });
  write_manifest(all_done, std::nullopt);
}

void Experiment::run_all() {
  for (Stage s : all_stages()) run_stage(s);
}

void Experiment::write_manifest(bool complete, const std::optional<std::string>& failure) {
  std::vector<std::string> files;
  for (const char* sub : {"models", "attacks", "reports"}) {
    if (!fs::exists(dir() / sub)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(dir() / sub))
      if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir()).generic_string());
  }
  std::sort(files.begin(), files.end());
  json doc = {{"format", "advaware.run_manifest"},
              {"version", 1},
              {"complete", complete},
              {"config", config_echo(cfg_)},
              {"stages", stage_status_},
              {"files", files}};
  if (failure) doc["failure"] = *failure;
  write_json_file(doc, dir() / "manifest.json");
}

}  // namespace advaware
