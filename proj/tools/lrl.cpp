// lrl run <experiment> [--config file.ini] [--set section.key=value]... [shortcuts]

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lrl/errors.hpp"
#include "lrl/harness/audits.hpp"
#include "lrl/harness/config.hpp"
#include "lrl/harness/experiments.hpp"
#include "lrl/harness/hardness.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kConfig = 3, kFailedTrials = 4, kError = 5 };

lrl::harness::ExperimentReport dispatch(const lrl::harness::ExperimentConfig& cfg) {
  using lrl::harness::Experiment;
  switch (cfg.experiment) {
    case Experiment::Table1: return lrl::harness::table1_experiment(cfg);
    case Experiment::Curves: return lrl::harness::curves_experiment(cfg);
    case Experiment::EluderAudit: return lrl::harness::eluder_experiment(cfg);
    case Experiment::Hardness: return lrl::harness::hardness_experiment(cfg);
    case Experiment::LemmaChecks: return lrl::harness::lemma_checks_experiment(cfg);
    case Experiment::Certify: return lrl::harness::certify_experiment(cfg);
  }
  throw lrl::ConfigError("unhandled experiment");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong representation learning simulator"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write CSV artifacts");

  std::string experiment;
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  run->add_option("experiment", experiment, "table1 | curves | eluder | hardness | lemma-checks | certify")
      ->required()
      ->check(CLI::IsMember({"table1", "curves", "eluder", "hardness", "lemma-checks", "certify"}));
  run->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  run->add_option("--set", sets, "Override a field, e.g. --set optimizer.learning_rate=0.05")->take_all();

  // Shortcuts for the most common fields; each becomes a --set override.
  const std::vector<std::pair<std::string, std::string>> shortcuts{
      {"--seed", "run.seed"},         {"--trials", "run.trials"},       {"--output", "run.output"},
      {"--d", "stream.d"},            {"--T", "stream.T"},              {"--k", "stream.k"},
      {"--beta", "stream.beta"},      {"--epsilon", "learner.epsilon"}, {"--delta", "learner.delta"},
      {"--policy", "learner.policy"}, {"--lr", "optimizer.learning_rate"}, {"--max-epochs", "optimizer.max_epochs"}};
  std::vector<std::optional<std::string>> shortcut_values(shortcuts.size());
  for (std::size_t i = 0; i < shortcuts.size(); ++i)
    run->add_option(shortcuts[i].first, shortcut_values[i], "Same as --set " + shortcuts[i].second + "=...");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) overrides.push_back(lrl::harness::parse_override(s));
    for (std::size_t i = 0; i < shortcuts.size(); ++i)
      if (shortcut_values[i]) overrides.emplace_back(shortcuts[i].second, *shortcut_values[i]);
    std::optional<std::filesystem::path> file;
    if (config_path) file = *config_path;
    const auto cfg = lrl::harness::load_config(lrl::harness::experiment_from_string(experiment), file, overrides);

    const auto report = dispatch(cfg);
    for (const auto& line : report.summary) std::cout << line << '\n';
    std::cout << "wrote " << report.files.size() << " files to " << lrl::harness::resolve_output_dir(cfg).string() << '\n';
    for (const auto& f : report.failures) std::cerr << "failed: " << f << '\n';
    return report.ok() ? kOk : kFailedTrials;
  } catch (const lrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
