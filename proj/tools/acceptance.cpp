// Acceptance checks A1-A8. One line per criterion; exit status 1 if any fails.
//
//   tspo_acceptance [--only A3 --only A5] [--jobs n]

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tspo/experiment.hpp"
#include "tspo/kkt.hpp"
#include "tspo/problems.hpp"
#include "tspo/testutil.hpp"

using namespace tspo;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

int g_jobs = 1;

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

VectorXd uniform(Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

// ---- A1 ----------------------------------------------------------------

VectorXd resolve(const RelaxedLp<double>& lp, const BarrierSolution<double>& base) {
  const bool interior = base.x.minCoeff() > 0 && (lp.num_ineq() == 0 || (lp.G * base.x - lp.h).minCoeff() > 0);
  if (interior) {
    const auto sol = solve_fixed_mu(lp, base.mu, base, 1e-13, 200);
    if (sol.converged) return sol.x;
  }
  return solve_barrier(lp, base.mu, 1e-13).x;
}

// Block entries flattened row-major, matching the Jacobian column layout.
VectorXd flatten_block(const RelaxedLp<double>& lp, Block block) {
  switch (block) {
    case Block::c:
      return lp.c;
    case Block::b:
      return lp.b;
    case Block::h:
      return lp.h;
    case Block::G:
      return Eigen::Map<const VectorXd>(MatrixXd(lp.G.transpose()).data(), lp.G.size());
    case Block::A:
      return Eigen::Map<const VectorXd>(MatrixXd(lp.A.transpose()).data(), lp.A.size());
  }
  return {};
}

RelaxedLp<double> with_block(RelaxedLp<double> lp, Block block, const VectorXd& v) {
  const auto unflatten = [&v](MatrixXd& M) {
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j) M(i, j) = v(i * M.cols() + j);
  };
  switch (block) {
    case Block::c:
      lp.c = v;
      break;
    case Block::b:
      lp.b = v;
      break;
    case Block::h:
      lp.h = v;
      break;
    case Block::G:
      unflatten(lp.G);
      break;
    case Block::A:
      unflatten(lp.A);
      break;
  }
  return lp;
}

Outcome a1() {
  constexpr double kMu = 1e-3;
  int passed = 0, total = 0;
  double worst = 0;
  for (Block block : {Block::c, Block::A, Block::b, Block::G, Block::h}) {
    const bool needs_eq = block == Block::b || block == Block::A;
    testutil::RandomLpSpec spec;
    spec.d_min = 2;
    spec.d_max = 5;
    spec.p_min = needs_eq ? 1 : 0;
    spec.p_max = 2;
    spec.q_min = 1;
    spec.q_max = 4;  // the bounding row makes at most 5
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto gen = testutil::gen_feasible_lp(spec, 7000 + seed);
      const auto sol = solve_barrier(gen.lp, kMu, 1e-13);
      const BlockRequest want{block == Block::c, block == Block::A, block == Block::b, block == Block::G,
                              block == Block::h};
      const auto g = block_gradients(gen.lp, sol, want);
      const MatrixXd& J = block == Block::c   ? g.dx_dc
                          : block == Block::A ? g.dx_dA
                          : block == Block::b ? g.dx_db
                          : block == Block::G ? g.dx_dG
                                              : g.dx_dh;
      const MatrixXd fd = testutil::finite_diff_jacobian(
          [&](const VectorXd& v) { return resolve(with_block(gen.lp, block, v), sol); }, flatten_block(gen.lp, block));
      const double err = (J - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-6);
      worst = std::max(worst, err);
      passed += err <= 1e-3 ? 1 : 0;
      ++total;
    }
  }
  return {passed == total, std::to_string(passed) + "/" + std::to_string(total) +
                               " block Jacobians within 1e-3, max rel err " + fmt("%.2e", worst)};
}

// ---- A2 ----------------------------------------------------------------

Outcome a2() {
  int lp_ok = 0, knap_ok = 0;
  double worst_gap = 0;
  testutil::RandomLpSpec spec;
  spec.d_max = 5;
  spec.q_max = 5;
  spec.p_max = 2;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, 9000 + seed);
    const auto exact = solve_lp_exact(gen.lp);
    const auto oracle = testutil::vertex_enumerate_lp(gen.lp);
    const double gap = std::abs(exact.objective - oracle.objective);
    worst_gap = std::max(worst_gap, gap);
    lp_ok += exact.status == SolveStatus::Optimal && gap <= 1e-6 ? 1 : 0;
  }
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> value(1, 30), size(5, 40);
  for (int trial = 0; trial < 100; ++trial) {
    auto milp = make_milp<double>(10, 0, 11);
    milp.h(0) = -100;
    for (Index j = 0; j < 10; ++j) {
      milp.c(j) = -value(rng);
      milp.G(0, j) = -size(rng);
      milp.G(j + 1, j) = -1;
      milp.h(j + 1) = -1;
      milp.int_vars.push_back(j);
    }
    const auto bnb = solve_milp_bnb(milp);
    const auto brute = enumerate_binary(milp);
    knap_ok += bnb.objective == brute.objective && bnb.x == brute.x ? 1 : 0;
  }
  return {lp_ok == 100 && knap_ok == 100, "LP " + std::to_string(lp_ok) + "/100 (max gap " + fmt("%.1e", worst_gap) +
                                              "), knapsack " + std::to_string(knap_ok) + "/100 identical"};
}

// ---- A3 ----------------------------------------------------------------

AlloySpec toy_alloy(Index K, Index M, std::mt19937_64& rng) {
  AlloySpec spec;
  spec.cost = uniform(K, 1, 3, rng);
  spec.req = uniform(M, 0.5, 2, rng);
  spec.sigma = uniform(K, 0.1, 0.6, rng);
  return spec;
}

Outcome a3() {
  std::mt19937_64 rng(2024);
  int nonneg = 0, perfect = 0, total = 0;
  double min_regret = INFINITY, max_perfect = 0;
  const auto record = [&](const TwoStageProblem& p, const VectorXd& guess, const VectorXd& truth) {
    const double r = post_hoc_regret(p, guess, truth).preg;
    const double z = std::abs(post_hoc_regret(p, truth, truth).preg);
    min_regret = std::min(min_regret, r);
    max_perfect = std::max(max_perfect, z);
    nonneg += r >= -1e-9 ? 1 : 0;
    perfect += z <= 1e-9 ? 1 : 0;
    ++total;
  };
  for (int i = 0; i < 67; ++i) {
    const auto p = alloy_problem(toy_alloy(4, 2, rng));
    record(p, uniform(8, 0.05, 1, rng), uniform(8, 0.05, 1, rng));
  }
  for (int i = 0; i < 67; ++i) {
    KnapsackSpec spec;
    spec.d = 8;
    spec.cap = 20;
    spec.sigma = uniform(1, 0.05, 2, rng)(0);
    const auto p = knapsack_problem(spec);
    record(p, uniform(16, 1, 8, rng), uniform(16, 1, 8, rng));
  }
  for (int i = 0; i < 66; ++i) {
    const auto p = nsp_problem(nsp_random_spec(3, 2, 3, 3, 0.5, 2, rng()));
    const VectorXd H = uniform(6, 0, 2, rng).array().round();
    record(p, uniform(6, 0, 2, rng), H);
  }

  int prop1 = 0;
  for (int i = 0; i < 100; ++i) {
    const AlloySpec spec = toy_alloy(3, 2, rng);
    const auto p = alloy_problem(spec);
    const VectorXd guess = uniform(6, 0.05, 1, rng), truth = uniform(6, 0.05, 1, rng);
    MatrixXd con(2, 3);
    for (Index k = 0; k < 3; ++k)
      for (Index m = 0; m < 2; ++m) con(m, k) = truth(k * 2 + m);
    const auto scale_up = [&](const VectorXd& x1) {
      const VectorXd got = con * x1;
      double factor = 1;
      for (Index m = 0; m < 2; ++m) factor = std::max(factor, spec.req(m) / got(m));
      return VectorXd(x1 * factor * (1 + 1e-12));
    };
    prop1 += proposition1_check(p, guess, truth, scale_up).holds ? 1 : 0;
  }
  const bool pass = nonneg == total && perfect == total && prop1 == 100;
  return {pass, "regret >= 0 on " + std::to_string(nonneg) + "/" + std::to_string(total) + " (min " +
                    fmt("%.1e", min_regret) + "), perfect " + std::to_string(perfect) + "/" + std::to_string(total) +
                    ", correction bound " + std::to_string(prop1) + "/100"};
}

// ---- A4 ----------------------------------------------------------------

std::vector<double*> parameters(Mlp& net) {
  std::vector<double*> out;
  for (auto& l : net.layers) {
    for (Index i = 0; i < l.W.size(); ++i) out.push_back(l.W.data() + i);
    for (Index i = 0; i < l.b.size(); ++i) out.push_back(l.b.data() + i);
  }
  return out;
}

std::vector<double> flatten(const MlpGradients& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.W.data(), l.W.data() + l.W.size());
    out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
  }
  return out;
}

double surrogate_fd_error(const TwoStageProblem& p, Mlp net, const MatrixXd& features, const VectorXd& theta) {
  const SurrogateOptions tight{1e-3, 1e-12};
  const auto g = flatten(surrogate_loss_grad(p, net, features, theta, tight).grads);
  auto params = parameters(net);
  double scale = 0, err = 0;
  std::vector<double> fd(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w0 = *params[i];
    const auto loss = [&](const VectorXd& w) {
      *params[i] = w(0);
      ++net.version;
      const double v = surrogate_loss(p, forward(net, features).theta, theta, tight).loss;
      *params[i] = w0;
      return VectorXd::Constant(1, v);
    };
    fd[i] = testutil::finite_diff_jacobian(loss, VectorXd::Constant(1, w0))(0, 0);
    scale = std::max(scale, std::abs(fd[i]));
  }
  for (std::size_t i = 0; i < params.size(); ++i) err = std::max(err, std::abs(fd[i] - g[i]));
  return err / std::max(scale, 1e-12);
}

Outcome a4() {
  int passed = 0, total = 0;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(500 + seed);
    const Index n = 2 + static_cast<Index>(seed % 2);
    std::normal_distribution<double> normal(0, 0.3);
    const auto features = [&](Index rows) {
      MatrixXd f(rows, 2);
      for (Index i = 0; i < f.size(); ++i) f.data()[i] = normal(rng);
      return f;
    };

    const auto alloy = alloy_problem(toy_alloy(n, 1, rng));
    Mlp net = make_mlp({2, 4, 1}, seed);
    net.layers.back().b(0) = 0.5;
    const double ea = surrogate_fd_error(alloy, net, features(n), uniform(n, 0.2, 0.9, rng));

    KnapsackSpec ks;
    ks.d = n;
    ks.cap = 2.0 * static_cast<double>(n);
    ks.sigma = 0.3;
    const auto knap = knapsack_problem(ks);
    Mlp knet = make_mlp({2, 4, 2}, 100 + seed);
    knet.layers.back().b << 5, 3;
    VectorXd theta(2 * n);
    theta << uniform(n, 2, 8, rng), uniform(n, 2, 4, rng);
    const double ek = surrogate_fd_error(knap, knet, features(n), theta);

    for (double e : {ea, ek}) {
      worst = std::max(worst, e);
      passed += e <= 5e-3 ? 1 : 0;
      ++total;
    }
  }
  return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " toys within 5e-3, max rel err " +
                               fmt("%.2e", worst)};
}

// ---- A5, A6, A8 ----------------------------------------------------------

nlohmann::json knapsack_config(const std::vector<std::string>& methods, const std::vector<double>& sigmas) {
  return {
      {"problem", "knapsack"},
      {"spec", {{"d", 10}, {"cap", 100}}},
      {"data", {{"source", "synthetic"}, {"n", 300}, {"m", 8}, {"mapping", "relu_bump"}, {"noise_std", 1.0}}},
      {"methods", methods},
      {"penalty_factors", sigmas},
      {"runs", 10},
      {"seed", 0},
      {"jobs", g_jobs},
      {"train",
       {{"hidden", {16, 16, 16}},
        {"lr", 1e-3},
        {"epochs", 20},
        {"pretrain_epochs", 60},
        {"pretrain_lr", 1e-3},
        {"mse_epochs", 60},
        {"mu_cutoff", 1e-3},
        {"train_fraction", 0.7}}},
  };
}

double summary_preg(const ExperimentResult& r, const std::string& method) {
  for (const auto& s : r.summary)
    if (s.method == method) return s.mean_preg;
  return NAN;
}

Outcome a5() {
  const auto result = run_experiment(parse_config(knapsack_config({"2s", "nn", "ridge"}, {0.25})));
  const double two = summary_preg(result, "2s"), nn = summary_preg(result, "nn"), ridge = summary_preg(result, "ridge");
  const bool pass = two <= ridge && two <= 1.05 * nn;
  return {pass, "mean regret 2s " + fmt("%.4f", two) + ", nn " + fmt("%.4f", nn) + " (ratio " + fmt("%.3f", two / nn) +
                    "), ridge " + fmt("%.4f", ridge)};
}

Outcome a6() {
  const auto result = run_experiment(parse_config(knapsack_config({"2s"}, {0.05, 1, 4})));
  std::vector<double> feas;
  for (const auto& s : result.summary) feas.push_back(s.feasibility_fraction);
  int inversions = 0;
  bool within = true;
  std::string trend;
  for (std::size_t i = 0; i < feas.size(); ++i) {
    trend += (i ? " -> " : "") + fmt("%.2f%%", 100 * feas[i]);
    if (i > 0 && feas[i] < feas[i - 1]) {
      ++inversions;
      within = within && feas[i - 1] - feas[i] <= 0.02;
    }
  }
  const bool pass = feas.size() == 3 && (inversions == 0 || (inversions == 1 && within));
  return {pass, "Stage-1 feasibility over sigma 0.05, 1, 4: " + trend};
}

Outcome a8() {
  auto config = knapsack_config({"2s", "nn", "ridge", "knn"}, {0.25, 1});
  config["runs"] = 2;
  config["data"]["n"] = 80;
  config["train"]["epochs"] = 3;
  config["train"]["pretrain_epochs"] = 10;
  config["train"]["mse_epochs"] = 10;
  const auto parsed = parse_config(config);
  const std::string first = detail_csv(run_experiment(parsed).detail);
  const std::string second = detail_csv(run_experiment(parsed).detail);
  std::size_t rows = 0;
  for (char ch : first) rows += ch == '\n' ? 1 : 0;
  return {first == second, std::to_string(rows - 1) + " detail rows, reruns " +
                               (first == second ? "bitwise identical" : "differ")};
}

// ---- A7 ----------------------------------------------------------------

Outcome a7() {
  struct Row {
    std::string name;
    TwoStageProblem problem;
    Index d, constraints, params;
  };
  const std::vector<Row> rows{
      {"brass", alloy_problem(brass_preset()), 10, 12, 20},
      {"titanium", alloy_problem(titanium_preset()), 10, 14, 40},
      {"knapsack", knapsack_problem(KnapsackSpec{}), 10, 21, 10},
      {"nurse", nsp_problem(nsp_random_spec(15, 7, 3, 3, 0.25, 10, 0)), 315, 846, 21},
  };
  bool pass = true;
  std::ostringstream os;
  for (const auto& r : rows) {
    const auto dim = dimensions(r.problem);
    pass = pass && dim.d == r.d && dim.params == r.params;
    os << r.name << " d=" << dim.d << " constraints=" << dim.constraints << (dim.constraints == r.constraints ? "" : "*")
       << " params=" << dim.params << "x" << dim.outputs << "; ";
  }
  std::string detail = os.str();
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  app.add_option("--only", only, "run only these criteria (A1..A8)");
  app.add_option("--jobs", g_jobs, "evaluation threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"A1", "gradient fidelity", 120, a1},       {"A2", "solver correctness", 60, a2},
      {"A3", "framework identities", 120, a3},    {"A4", "end-to-end surrogate gradient", 120, a4},
      {"A5", "relative learning performance", 900, a5}, {"A6", "feasibility trend", 600, a6},
      {"A7", "dimensional fidelity", 10, a7},     {"A8", "reproducibility", 300, a8},
  };
  for (const auto& id : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.id == id; })) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
  }

  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    all = all && pass;
    std::cout << c.id << " " << (pass ? "PASS" : "FAIL") << " " << c.title << ": " << out.detail << " ["
              << fmt("%.1f", secs) << " s" << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  return all ? 0 : 1;
}
