#pragma once

// Experiment runner: train each method on a benchmark for every penalty
// factor and run, evaluate exactly, and write per-run and aggregated CSVs.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tspo/dataio.hpp"
#include "tspo/two_stage.hpp"

namespace tspo {

struct ConfigIssue {
  std::string field;
  std::string message;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;
  Eigen::Index n = 300;
  Eigen::Index m = 8;
  Mapping mapping = Mapping::ReluBump;
  double noise_std = 0.1;
};

struct MethodConfig {
  /// Surrogate (2s) phase.
  TrainConfig train;
  /// Epochs of the plain regression baseline (nn).
  int mse_epochs = 60;
  double ridge_lambda = 1e-2;
  Eigen::Index knn_k = 5;
  double train_fraction = 0.7;
};

struct ExperimentConfig {
  std::string problem;
  /// Problem-specific fields; see make_problem.
  nlohmann::json spec = nlohmann::json::object();
  DataConfig data;
  std::vector<std::string> methods;
  std::vector<double> penalty_factors;
  int runs = 10;
  std::uint64_t seed = 0;
  MethodConfig method;
  std::string out = "results";
  int jobs = 1;
};

/// Every schema problem in `j`, not just the first one.
std::vector<ConfigIssue> validate_config(const nlohmann::json& j);

/// Throws ConfigError carrying the first issue's field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// The benchmark at one penalty factor. Alloy and nurse factors are drawn
/// per entry from factor +/- 0.015 with `seed`; the others are scalar.
TwoStageProblem make_problem(const ExperimentConfig& config, double factor, std::uint64_t seed);

/// Synthetic ground truth for the problem's parameters.
SynthSpec synth_spec(const ExperimentConfig& config, const TwoStageProblem& problem);

/// Per output, a ridge fit on [features, 1] pooled over every parameter row.
Predictor make_ridge_predictor(const Dataset& train, double lambda);
/// Per output, the mean of the k nearest training rows.
Predictor make_knn_predictor(const Dataset& train, Eigen::Index k);

struct DetailRow {
  std::string problem;
  std::string method;
  double penalty_factor = 0;
  std::uint64_t run_seed = 0;
  EvalSummary eval;
};

struct SummaryRow {
  std::string problem;
  std::string method;
  double penalty_factor = 0;
  int runs = 0;
  double mean_preg = 0;
  double std_preg = 0;  // across run means
  double mean_tov = 0;
  double feasibility_fraction = 0;
};

struct ExperimentResult {
  std::vector<DetailRow> detail;
  std::vector<SummaryRow> summary;
};

/// Runs seed, seed + 1, ... Each run draws its own data (synthetic) or split
/// (csv); the same data serves every penalty factor and method.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<DetailRow>& detail);

/// Values are printed with 10 significant digits.
std::string detail_csv(const std::vector<DetailRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Writes detail.csv and summary.csv under `dir`, creating it if needed.
void write_results(const ExperimentResult& result, const std::string& dir);

}  // namespace tspo
