// Command-line experiment runner.
//
//   tspo run config.json [--out dir] [--seed n] [--jobs n]
//   tspo validate config.json

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <json.hpp>

#include "tspo/errors.hpp"
#include "tspo/experiment.hpp"

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tspo::ConfigError("", "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw tspo::ConfigError("", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage predict-then-optimize experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;

  auto* run = app.add_subcommand("run", "train, evaluate and write detail.csv and summary.csv");
  run->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides the config)");
  auto* seed_opt = run->add_option("--seed", seed, "base seed (overrides the config)");
  run->add_option("--jobs", jobs, "evaluation threads")->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("validate", "check a config without running it");
  check->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto doc = read_json(config_path);
    const auto issues = tspo::validate_config(doc);
    if (check->parsed()) {
      for (const auto& issue : issues) std::cout << issue.field << ": " << issue.message << "\n";
      if (issues.empty()) std::cout << "ok\n";
      return issues.empty() ? 0 : 1;
    }
    for (const auto& issue : issues) std::cerr << "config error: " << issue.field << ": " << issue.message << "\n";
    if (!issues.empty()) return 2;

    auto config = tspo::parse_config(doc);
    if (*out_opt) config.out = out_dir;
    if (*seed_opt) config.seed = seed;
    if (jobs > 0) config.jobs = jobs;
    const auto result = tspo::run_experiment(config);
    tspo::write_results(result, config.out);
    std::cout << tspo::summary_csv(result.summary);
    return 0;
  } catch (const tspo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
