#pragma once

// Two-stage predict-then-optimize with soft commitments. Stage 1 solves the
// parameterized program under predicted parameters; Stage 2 re-optimizes
// under the true parameters, paying a penalty for moving away from the
// Stage-1 decision. The regret of the final decision drives training.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tspo/barrier.hpp"
#include "tspo/dataio.hpp"
#include "tspo/exact.hpp"
#include "tspo/kkt.hpp"
#include "tspo/milp.hpp"
#include "tspo/predictor.hpp"

namespace tspo {

/// Callbacks take (x1, x2, theta) where x1 and x2 have the Stage-1 dimension.
using PenaltyFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using PenaltyGradFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;

struct TwoStageProblem {
  std::string name;
  /// Parameters are theta (t * k entries, output-major).
  ParamTemplate<double> stage1;
  /// Builds the Stage-2 template for the true theta. Its parameters are the
  /// Stage-1 decision x1; its first stage1.dim() variables are the final
  /// decision, any further ones are auxiliaries.
  std::function<ParamTemplate<double>(const Eigen::VectorXd& theta)> stage2;
  PenaltyFn penalty;
  /// d(obj(x2) + Pen(x1 -> x2)) / dx2 and dPen / dx1.
  PenaltyGradFn dpreg_dx2;
  PenaltyGradFn dpreg_dx1;
  /// Predictions are clamped into [theta_lo, theta_hi] before Stage 1;
  /// clamped entries receive no gradient.
  Eigen::VectorXd theta_lo;
  Eigen::VectorXd theta_hi;
  /// Parameter rows and outputs per row; num_params = t * k.
  Eigen::Index t = 0;
  Eigen::Index k = 1;
  /// Stored negated; reported values flip the sign back.
  bool maximize = false;
  std::vector<Block> dx1_blocks;
  std::vector<Block> dx2_blocks;

  Eigen::Index dim() const { return stage1.skeleton.dim(); }
  Eigen::Index num_params() const { return stage1.num_params; }
};

/// Throws DimensionMismatch if the pieces disagree.
void validate(const TwoStageProblem& problem);

struct SolveMode {
  bool barrier = false;
  double mu_cutoff = 1e-3;

  static SolveMode exact() { return {}; }
  static SolveMode relaxed(double mu) { return {true, mu}; }
};

Eigen::VectorXd clamp_theta(const TwoStageProblem& problem, const Eigen::VectorXd& theta_hat);

/// obj(x, theta) in minimization form.
double objective(const TwoStageProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& theta);

/// Stage-1 decision for clamped theta_hat. Throws Infeasible when the
/// predicted program has no solution.
Eigen::VectorXd stage1_solve(const TwoStageProblem& problem, const Eigen::VectorXd& theta_hat, SolveMode mode);

/// Full Stage-2 solution (decision followed by auxiliaries).
Eigen::VectorXd stage2_solve(const TwoStageProblem& problem, const Eigen::VectorXd& x1, const Eigen::VectorXd& theta,
                             SolveMode mode);

/// Optimal objective under theta (minimization form).
double true_optimum(const TwoStageProblem& problem, const Eigen::VectorXd& theta);

struct RegretReport {
  double preg = 0;
  double stage1_obj = 0;  // obj(x1, theta_hat)
  double stage2_obj = 0;  // obj(x2, theta)
  double penalty = 0;
  double true_opt = 0;
  bool stage1_feasible_under_truth = false;
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
};

/// Exact Stage 1, exact Stage 2 and the exact true optimum.
RegretReport post_hoc_regret(const TwoStageProblem& problem, const Eigen::VectorXd& theta_hat,
                             const Eigen::VectorXd& theta);

struct SurrogateOptions {
  double mu_cutoff = 1e-3;
  double tol = 1e-9;
};

struct SurrogateResult {
  /// obj(x2~, theta) + Pen(x1~ -> x2~, theta); the true optimum is omitted
  /// since it does not depend on the prediction.
  double loss = 0;
  Eigen::VectorXd dloss_dtheta;  // w.r.t. the raw network output
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
};

/// Surrogate loss and its gradient w.r.t. the predicted parameters, both
/// solves replaced by barrier solves at mu_cutoff.
SurrogateResult surrogate_loss(const TwoStageProblem& problem, const Eigen::VectorXd& theta_hat,
                               const Eigen::VectorXd& theta, const SurrogateOptions& opt = {});

struct SurrogateGrad {
  MlpGradients grads;
  SurrogateResult detail;
};

SurrogateGrad surrogate_loss_grad(const TwoStageProblem& problem, const Mlp& net, const Eigen::MatrixXd& features,
                                  const Eigen::VectorXd& theta, const SurrogateOptions& opt = {});

using Predictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd& features)>;

Predictor mlp_predictor(Mlp net);

struct EvalSummary {
  double mean_preg = 0;
  double std_preg = 0;  // sample standard deviation, 0 for a single instance
  double mean_tov = 0;  // reporting sign
  double feasibility_fraction = 0;
  std::vector<RegretReport> reports;
};

/// Exact evaluation of every instance, fanned out over `jobs` threads and
/// reduced in instance order.
EvalSummary evaluate(const TwoStageProblem& problem, const Predictor& model, const Dataset& test, int jobs = 1);

struct TrainConfig {
  std::vector<Eigen::Index> hidden{16, 16, 16};
  double lr = 1e-3;
  /// Surrogate-loss epochs; ignored for plain regression training.
  int epochs = 12;
  /// Mean-squared-error epochs before the surrogate phase.
  int pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
  double weight_decay = 0;
  double mu_cutoff = 1e-3;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct EpochRecord {
  int epoch = 0;
  double mean_val_preg = 0;  // NaN without a validation slice
  int skipped = 0;
};

struct TrainResult {
  Mlp net;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Shuffled per-instance Adam steps on the surrogate loss. The network at the
/// epoch with the lowest validation regret is returned (epoch 0 is the
/// network before any surrogate step).
TrainResult train(const TwoStageProblem& problem, const Dataset& data, const TrainConfig& config);

/// Same loop on the squared parameter error; the best epoch is chosen by
/// validation error. Used for pretraining and the plain NN baseline.
TrainResult train_mse(const Dataset& data, const TrainConfig& config, std::optional<Mlp> init = std::nullopt);

/// Initial network for a dataset: m inputs, config.hidden, k outputs.
Mlp initial_mlp(const Dataset& data, const TrainConfig& config);

struct Proposition1Verdict {
  double lhs = 0;  // obj(x2) + Pen(x1 -> x2)
  double rhs = 0;  // obj(x_corr) + Pen(x1 -> x_corr)
  bool holds = false;
};

using Correction = std::function<Eigen::VectorXd(const Eigen::VectorXd& x1)>;

/// Compares exact Stage 2 against a correction procedure. Throws
/// CorrectionInfeasible if the corrected point is infeasible under theta.
Proposition1Verdict proposition1_check(const TwoStageProblem& problem, const Eigen::VectorXd& theta_hat,
                                       const Eigen::VectorXd& theta, const Correction& correction);

}  // namespace tspo
