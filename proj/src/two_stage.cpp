#include "tspo/two_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "tspo/log.hpp"

namespace tspo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const TwoStageProblem& problem) {
  validate(problem.stage1);
  const Index n = problem.num_params();
  if (problem.t * problem.k != n) throw DimensionMismatch("t * k must equal the number of Stage-1 parameters");
  if (problem.theta_lo.size() != n || problem.theta_hi.size() != n) {
    throw DimensionMismatch("clamp bounds must have one entry per parameter");
  }
  if ((problem.theta_lo.array() > problem.theta_hi.array()).any()) throw DimensionMismatch("clamp bounds cross");
  if (!problem.stage2 || !problem.penalty || !problem.dpreg_dx1 || !problem.dpreg_dx2) {
    throw DimensionMismatch("two-stage problem is missing a callback");
  }
}

VectorXd clamp_theta(const TwoStageProblem& problem, const VectorXd& theta_hat) {
  if (theta_hat.size() != problem.num_params()) throw DimensionMismatch("prediction has the wrong length");
  return theta_hat.cwiseMax(problem.theta_lo).cwiseMin(problem.theta_hi);
}

double objective(const TwoStageProblem& problem, const VectorXd& x, const VectorXd& theta) {
  return evaluate_objective(instantiate(problem.stage1, theta), x);
}

namespace {

ExactSolution solve_exact_or_throw(const StandardFormMilp<double>& milp, const char* what) {
  auto sol = solve_milp_exact(milp);
  if (sol.status == SolveStatus::Infeasible) throw Infeasible(std::string(what) + " is infeasible");
  if (sol.status == SolveStatus::Unbounded) throw Unbounded(std::string(what) + " is unbounded");
  return sol;
}

struct RelaxedSolve {
  RelaxedLp<double> lp;
  BarrierSolution<double> sol;
};

RelaxedSolve relaxed_solve(const StandardFormMilp<double>& milp, double mu, double tol) {
  RelaxedSolve out{relax(milp), {}};
  out.sol = solve_barrier(out.lp, mu, tol);
  return out;
}

}  // namespace

VectorXd stage1_solve(const TwoStageProblem& problem, const VectorXd& theta_hat, SolveMode mode) {
  if (!all_finite(theta_hat)) throw NonFinite("predicted parameters must be finite");
  const auto milp = instantiate(problem.stage1, clamp_theta(problem, theta_hat));
  if (mode.barrier) return relaxed_solve(milp, mode.mu_cutoff, 1e-9).sol.x;
  return solve_exact_or_throw(milp, "Stage 1").x;
}

VectorXd stage2_solve(const TwoStageProblem& problem, const VectorXd& x1, const VectorXd& theta, SolveMode mode) {
  if (x1.size() != problem.dim()) throw DimensionMismatch("Stage-1 decision has the wrong length");
  const auto milp = instantiate(problem.stage2(theta), x1);
  if (mode.barrier) return relaxed_solve(milp, mode.mu_cutoff, 1e-9).sol.x;
  return solve_exact_or_throw(milp, "Stage 2").x;
}

double true_optimum(const TwoStageProblem& problem, const VectorXd& theta) {
  return solve_exact_or_throw(instantiate(problem.stage1, theta), "true program").objective;
}

RegretReport post_hoc_regret(const TwoStageProblem& problem, const VectorXd& theta_hat, const VectorXd& theta) {
  if (!all_finite(theta)) throw NonFinite("true parameters must be finite");
  RegretReport r;
  const VectorXd clamped = clamp_theta(problem, theta_hat);
  r.x1 = stage1_solve(problem, clamped, SolveMode::exact());
  r.stage1_obj = objective(problem, r.x1, clamped);
  r.stage1_feasible_under_truth = check_feasibility(instantiate(problem.stage1, theta), r.x1).feasible;
  r.x2 = stage2_solve(problem, r.x1, theta, SolveMode::exact()).head(problem.dim());
  r.stage2_obj = objective(problem, r.x2, theta);
  r.penalty = problem.penalty(r.x1, r.x2, theta);
  r.true_opt = true_optimum(problem, theta);
  r.preg = r.stage2_obj + r.penalty - r.true_opt;
  return r;
}

SurrogateResult surrogate_loss(const TwoStageProblem& problem, const VectorXd& theta_hat, const VectorXd& theta,
                               const SurrogateOptions& opt) {
  const Index d = problem.dim();
  const VectorXd clamped = clamp_theta(problem, theta_hat);

  const auto s1 = relaxed_solve(instantiate(problem.stage1, clamped), opt.mu_cutoff, opt.tol);
  const VectorXd& x1 = s1.sol.x;
  const auto tmpl2 = problem.stage2(theta);
  const auto s2 = relaxed_solve(instantiate(tmpl2, x1), opt.mu_cutoff, opt.tol);
  const VectorXd x2 = s2.sol.x.head(d);

  SurrogateResult out;
  out.x1 = x1;
  out.x2 = x2;
  out.loss = objective(problem, x2, theta) + problem.penalty(x1, x2, theta);

  // dL/dx1 = (dL/dx2)(dx2/dx1) + dL/dx1|x2, then through Stage 1 to theta.
  VectorXd up2 = VectorXd::Zero(s2.lp.dim());
  up2.head(d) = problem.dpreg_dx2(x1, x2, theta);
  const KktSystem<double> kkt2(s2.lp, s2.sol);
  const VectorXd dx1 = pullback(tmpl2, vjp(kkt2, up2)) + problem.dpreg_dx1(x1, x2, theta);
  const KktSystem<double> kkt1(s1.lp, s1.sol);
  VectorXd dtheta = pullback(problem.stage1, vjp(kkt1, dx1));
  for (Index i = 0; i < dtheta.size(); ++i) {
    if (theta_hat(i) < problem.theta_lo(i) || theta_hat(i) > problem.theta_hi(i)) dtheta(i) = 0;
  }
  out.dloss_dtheta = dtheta;
  return out;
}

SurrogateGrad surrogate_loss_grad(const TwoStageProblem& problem, const Mlp& net, const MatrixXd& features,
                                  const VectorXd& theta, const SurrogateOptions& opt) {
  auto fw = forward(net, features);
  SurrogateGrad out;
  out.detail = surrogate_loss(problem, fw.theta, theta, opt);
  out.grads = backward(net, fw.tape, out.detail.dloss_dtheta);
  return out;
}

Predictor mlp_predictor(Mlp net) {
  return [net = std::move(net)](const MatrixXd& features) {
    const MatrixXd rows = predict_rows(net, features);
    return VectorXd(Eigen::Map<const VectorXd>(rows.data(), rows.size()));
  };
}

EvalSummary evaluate(const TwoStageProblem& problem, const Predictor& model, const Dataset& test, int jobs) {
  if (test.size() == 0) throw EmptyTrainSet("evaluation set is empty");
  EvalSummary out;
  out.reports.resize(test.size());
  std::vector<std::exception_ptr> errors(test.size());
  const auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < test.size(); i += stride) {
      try {
        const auto& inst = test.instances[i];
        out.reports[i] = post_hoc_regret(problem, model(inst.features), inst.theta);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(test.size())));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double n = static_cast<double>(test.size());
  double sum = 0, tov = 0, feasible = 0;
  for (const auto& r : out.reports) {
    sum += r.preg;
    tov += r.true_opt;
    feasible += r.stage1_feasible_under_truth ? 1 : 0;
  }
  out.mean_preg = sum / n;
  out.mean_tov = (problem.maximize ? -tov : tov) / n;
  out.feasibility_fraction = feasible / n;
  double ss = 0;
  for (const auto& r : out.reports) ss += (r.preg - out.mean_preg) * (r.preg - out.mean_preg);
  out.std_preg = test.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return out;
}

Mlp initial_mlp(const Dataset& data, const TrainConfig& config) {
  std::vector<Index> sizes{data.m};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(data.k);
  return make_mlp(sizes, config.seed);
}

namespace {

std::pair<Dataset, Dataset> train_val(const Dataset& data, double val_fraction) {
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(data.size())));
  return {head(data, data.size() - n_val), tail(data, n_val)};
}

double mean_mse(const Mlp& net, const Dataset& data) {
  double sum = 0;
  for (const auto& inst : data.instances) {
    const MatrixXd rows = predict_rows(net, inst.features);
    sum += (Eigen::Map<const VectorXd>(rows.data(), rows.size()) - inst.theta).squaredNorm() /
           static_cast<double>(inst.theta.size());
  }
  return sum / static_cast<double>(data.size());
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

TrainResult train_mse(const Dataset& data, const TrainConfig& config, std::optional<Mlp> init) {
  if (data.size() == 0) throw EmptyTrainSet("training set is empty");
  auto [fit, val] = train_val(data, config.val_fraction);
  if (fit.size() == 0) throw EmptyTrainSet("no instances left after the validation slice");
  TrainResult out;
  out.net = init ? *init : initial_mlp(data, config);
  auto state = make_adam(out.net, config.pretrain_lr);
  state.weight_decay = config.weight_decay;
  std::mt19937_64 rng(config.seed ^ 0x6d7365ULL);

  const auto score = [&](const Mlp& net) {
    return val.size() > 0 ? mean_mse(net, val) : std::numeric_limits<double>::quiet_NaN();
  };
  out.history.push_back({0, score(out.net), 0});
  Mlp best = out.net;
  double best_score = out.history.back().mean_val_preg;

  for (int epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    for (std::size_t i : shuffled(fit.size(), rng)) {
      const auto& inst = fit.instances[i];
      auto fw = forward(out.net, inst.features);
      const VectorXd up = 2.0 * (fw.theta - inst.theta) / static_cast<double>(inst.theta.size());
      adam_step(out.net, state, backward(out.net, fw.tape, up));
    }
    const double s = score(out.net);
    out.history.push_back({epoch, s, 0});
    if (val.size() == 0 || s < best_score) {
      best = out.net;
      best_score = s;
      out.best_epoch = epoch;
    }
  }
  out.net = best;
  return out;
}

TrainResult train(const TwoStageProblem& problem, const Dataset& data, const TrainConfig& config) {
  validate(problem);
  if (data.size() == 0) throw EmptyTrainSet("training set is empty");
  if (data.t * data.k != problem.num_params()) throw DimensionMismatch("dataset shape does not match the problem");
  auto [fit, val] = train_val(data, config.val_fraction);
  if (fit.size() == 0) throw EmptyTrainSet("no instances left after the validation slice");

  TrainResult out;
  out.net = initial_mlp(data, config);
  if (config.pretrain_epochs > 0) out.net = train_mse(data, config, out.net).net;

  const auto score = [&](const Mlp& net) {
    if (val.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return evaluate(problem, mlp_predictor(net), val, config.jobs).mean_preg;
  };
  out.history.push_back({0, score(out.net), 0});
  Mlp best = out.net;
  double best_score = out.history.back().mean_val_preg;

  auto state = make_adam(out.net, config.lr);
  state.weight_decay = config.weight_decay;
  std::mt19937_64 rng(config.seed ^ 0x327370ULL);
  const SurrogateOptions opt{config.mu_cutoff, 1e-9};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    int skipped = 0;
    for (std::size_t i : shuffled(fit.size(), rng)) {
      const auto& inst = fit.instances[i];
      try {
        const auto g = surrogate_loss_grad(problem, out.net, inst.features, inst.theta, opt);
        adam_step(out.net, state, g.grads);
      } catch (const NumericalFailure& e) {
        ++skipped;
        log_warn(std::string("skipping instance: ") + e.what());
      } catch (const Infeasible& e) {
        ++skipped;
        log_warn(std::string("skipping instance: ") + e.what());
      } catch (const SingularSystem& e) {
        ++skipped;
        log_warn(std::string("skipping instance: ") + e.what());
      }
    }
    const double s = score(out.net);
    out.history.push_back({epoch, s, skipped});
    log_info(problem.name + " epoch " + std::to_string(epoch) + " val preg " + std::to_string(s));
    if (val.size() == 0 || s < best_score) {
      best = out.net;
      best_score = s;
      out.best_epoch = epoch;
    }
  }
  out.net = best;
  return out;
}

Proposition1Verdict proposition1_check(const TwoStageProblem& problem, const VectorXd& theta_hat,
                                       const VectorXd& theta, const Correction& correction) {
  const VectorXd x1 = stage1_solve(problem, theta_hat, SolveMode::exact());
  const VectorXd corrected = correction(x1);
  if (corrected.size() != problem.dim() ||
      !check_feasibility(instantiate(problem.stage1, theta), corrected).feasible) {
    throw CorrectionInfeasible("corrected decision is infeasible under the true parameters");
  }
  const VectorXd x2 = stage2_solve(problem, x1, theta, SolveMode::exact()).head(problem.dim());
  Proposition1Verdict v;
  v.lhs = objective(problem, x2, theta) + problem.penalty(x1, x2, theta);
  v.rhs = objective(problem, corrected, theta) + problem.penalty(x1, corrected, theta);
  v.holds = v.lhs <= v.rhs + 1e-9 * (1 + std::abs(v.rhs));
  return v;
}

}  // namespace tspo
