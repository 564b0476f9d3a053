#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "advaware/common.hpp"
#include "advaware/data.hpp"
#include "advaware/experiment.hpp"
#include "advaware/serialize.hpp"

using namespace advaware;

namespace {

constexpr int exit_config = 2;
constexpr int exit_stage_base = 10;

struct Options {
  std::string config;
  std::string output_dir;
  int jobs = 0;
  std::vector<std::string> sets;
  int detect_k = 0;
};

std::vector<std::pair<std::string, std::string>> overrides(const Options& o) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.detect_k > 0) out.emplace_back("detect_k", std::to_string(o.detect_k));
  return out;
}

int execute(const Options& o, const std::vector<Stage>& stages) {
  try {
    if (o.jobs > 0) set_jobs(o.jobs);
    auto cfg = ExperimentConfig::load(o.config, overrides(o));
    // --output-dir is taken relative to the working directory, not the config
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    Experiment exp(std::move(cfg));
    for (Stage s : stages) {
      std::cerr << "[" << to_string(s) << "]\n";
      exp.run_stage(s);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const StageError& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return exit_stage_base + static_cast<int>(e.stage());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial-aware classification: a network cross-checked by a secondary verifier"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;

  app.add_option("-c,--config", opt.config, "experiment YAML")->envname("ADVAWARE_CONFIG")->required();
  app.add_option("-o,--output-dir", opt.output_dir, "override output_dir");
  app.add_option("-j,--jobs", opt.jobs, "worker threads (results do not depend on it)");
  app.add_option("-s,--set", opt.sets, "override a config key, e.g. --set net.epochs=3")->take_all();

  const std::vector<std::pair<std::string, Stage>> singles{
      {"train-dnn", Stage::train_dnn},   {"train-verifier", Stage::train_verifier},
      {"attack", Stage::attack},         {"categorize", Stage::categorize},
      {"detect", Stage::detect},         {"sweep-k", Stage::sweep_k},
      {"optimize", Stage::optimize},     {"report", Stage::report}};
  std::vector<Stage> chosen;
  for (const auto& [name, stage] : singles) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage");
    if (stage == Stage::detect) sub->add_option("-k,--k", opt.detect_k, "verifier list length")->check(CLI::PositiveNumber);
    sub->callback([&chosen, stage = stage] { chosen = {stage}; });
  }
  app.add_subcommand("run", "run every stage in order")->callback([&chosen] { chosen = all_stages(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }
  return execute(opt, chosen);
}
