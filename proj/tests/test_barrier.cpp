#include <doctest.h>

#include <cmath>
#include <functional>

#include "tspo/barrier.hpp"
#include "tspo/exact.hpp"
#include "tspo/testutil.hpp"

using namespace tspo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((f(lo) < 0) == (f(mid) < 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

RelaxedLp<double> lp_1d(double c, double g, double h) {
  RelaxedLp<double> lp;
  lp.c = VectorXd::Constant(1, c);
  lp.A = MatrixXd(0, 1);
  lp.b = VectorXd(0);
  lp.G = MatrixXd::Constant(1, 1, g);
  lp.h = VectorXd::Constant(1, h);
  return lp;
}

void check_interior_invariants(const RelaxedLp<double>& lp, const BarrierSolution<double>& sol) {
  CHECK(sol.x.minCoeff() > 0);
  if (lp.num_ineq() > 0) CHECK((lp.G * sol.x - lp.h).minCoeff() > 0);
  const double bnorm = lp.num_eq() > 0 ? lp.b.cwiseAbs().maxCoeff() : 0.0;
  if (lp.num_eq() > 0) CHECK((lp.A * sol.x - lp.b).cwiseAbs().maxCoeff() <= 1e-8 * (1 + bnorm));
  CHECK(stationarity_residual(lp, sol) <= 1e-8 * (1 + lp.c.cwiseAbs().maxCoeff()));
}

}  // namespace

TEST_CASE("relax drops integrality only") {
  auto milp = make_milp<double>(2, 1, 1);
  milp.c << 1, 2;
  milp.A << 1, 1;
  milp.b << 3;
  milp.G << 1, -1;
  milp.h << 0.5;
  milp.int_vars = {0};
  const auto lp = relax(milp);
  CHECK(lp.c == milp.c);
  CHECK(lp.A == milp.A);
  CHECK(lp.b == milp.b);
  CHECK(lp.G == milp.G);
  CHECK(lp.h == milp.h);
  milp.int_vars.clear();
  CHECK(relax(milp).c == milp.c);
}

TEST_CASE("solve_fixed_mu: min x s.t. x >= 1") {
  const double mu = 0.01;
  const auto lp = lp_1d(1.0, 1.0, 1.0);
  const auto sol = solve_fixed_mu(lp, mu);
  const double root = bisect([mu](double x) { return 1 - mu / x - mu / (x - 1); }, 1.0 + 1e-12, 2.0);
  CHECK(sol.converged);
  CHECK(sol.x(0) == doctest::Approx(root).epsilon(1e-10));
  CHECK(sol.x(0) == doctest::Approx(1.0101).epsilon(1e-3));
  CHECK(sol.s(0) == doctest::Approx(root - 1).epsilon(1e-8));
}

TEST_CASE("zero objective on x >= 1 diverges; boxed version finds the analytic center") {
  const auto open = lp_1d(0.0, 1.0, 1.0);
  CHECK_THROWS_AS(solve_fixed_mu(open, 1.0), Unbounded);
  CHECK_THROWS_AS(solve_fixed_mu(open, 1.0), NumericalFailure);

  const double U = 10.0;
  RelaxedLp<double> boxed = open;
  boxed.G.resize(2, 1);
  boxed.G << 1, -1;
  boxed.h.resize(2);
  boxed.h << 1, -U;
  const auto sol = solve_fixed_mu(boxed, 1.0);
  const double center = bisect([U](double x) { return -1 / x - 1 / (x - 1) + 1 / (U - x); }, 1.0 + 1e-12, U - 1e-12);
  CHECK(sol.x(0) == doctest::Approx(center).epsilon(1e-9));
}

TEST_CASE("solve_fixed_mu: equality-only symmetric problem") {
  RelaxedLp<double> lp;
  lp.c = Eigen::Vector2d(1, 1);
  lp.A = MatrixXd::Ones(1, 2);
  lp.b = VectorXd::Constant(1, 2.0);
  lp.G = MatrixXd(0, 2);
  lp.h = VectorXd(0);
  const auto sol = solve_fixed_mu(lp, 0.5);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.x(1) == doctest::Approx(1.0).epsilon(1e-12));
  // stationarity: 1 - mu / x = y
  CHECK(sol.y(0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("solve_fixed_mu warm start and errors") {
  const auto lp = lp_1d(1.0, 1.0, 1.0);
  const auto cold = solve_fixed_mu(lp, 0.1);
  const auto warm = solve_fixed_mu(lp, 0.01, cold);
  CHECK(warm.x(0) == doctest::Approx(solve_fixed_mu(lp, 0.01).x(0)).epsilon(1e-10));
  BarrierSolution<double> bad = cold;
  bad.x(0) = 0.5;
  CHECK_THROWS_AS(solve_fixed_mu(lp, 0.01, bad), NotInterior);
  CHECK_THROWS(solve_fixed_mu(lp, 0.0));
  const auto capped = solve_fixed_mu(lp, 1e-6, cold, 1e-14, 1);
  CHECK_FALSE(capped.converged);
}

TEST_CASE("solve_barrier on a two-variable covering LP") {
  RelaxedLp<double> lp;
  lp.c = Eigen::Vector2d(2, 3);
  lp.A = MatrixXd(0, 2);
  lp.b = VectorXd(0);
  lp.G = MatrixXd::Ones(1, 2);
  lp.h = VectorXd::Constant(1, 1.0);
  const auto sol = solve_barrier(lp, 1e-6);
  CHECK(sol.mu == 1e-6);
  CHECK(std::abs(sol.x(0) - 1.0) < 1e-4);
  CHECK(std::abs(sol.x(1)) < 1e-4);
  const auto oracle = testutil::vertex_enumerate_lp(lp);
  CHECK((sol.x - oracle.x).cwiseAbs().maxCoeff() < 1e-4);
  check_interior_invariants(lp, sol);
}

TEST_CASE("solve_barrier with large right-hand sides") {
  // phase 1 centers in a box whose size scales with |h|
  for (double req : {1.0, 627.54, 1e4, 1e5}) {
    RelaxedLp<double> lp;
    lp.c = Eigen::Vector3d(1.0, 1.1, 1.2);
    lp.A = MatrixXd(0, 3);
    lp.b = VectorXd(0);
    lp.G = MatrixXd::Constant(2, 3, 0.5);
    lp.G(1, 0) = 0.1;
    lp.h = Eigen::Vector2d(req, 0.6 * req);
    const double mu = 1e-6;
    const auto sol = solve_barrier(lp, mu);
    const auto oracle = testutil::vertex_enumerate_lp(lp);
    INFO("req " << req);
    CHECK(sol.x.minCoeff() > 0);
    CHECK((lp.G * sol.x - lp.h).minCoeff() > 0);
    // a centered point is (d + q) mu from optimal
    CHECK(lp.c.dot(sol.x) - oracle.objective >= 0);
    CHECK(lp.c.dot(sol.x) - oracle.objective <= 5 * mu * 1.01);
  }
}

TEST_CASE("solve_barrier: smaller cutoff gives no worse objective") {
  testutil::RandomLpSpec spec;
  spec.d_max = 5;
  spec.q_max = 5;
  spec.p_max = 2;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, seed);
    const auto coarse = solve_barrier(gen.lp, 1e-3);
    const auto fine = solve_barrier(gen.lp, 1e-6);
    const double slack = 1e-6 * static_cast<double>(gen.lp.dim() + gen.lp.num_ineq()) * 10;
    CHECK(gen.lp.c.dot(fine.x) <= gen.lp.c.dot(coarse.x) + slack);
  }
}

TEST_CASE("solve_barrier detects infeasibility") {
  RelaxedLp<double> lp = lp_1d(1.0, 1.0, 1.0);
  lp.G.resize(2, 1);
  lp.G << 1, -1;
  lp.h.resize(2);
  lp.h << 1, 0;
  CHECK_THROWS_AS(solve_barrier(lp, 1e-3), Infeasible);

  RelaxedLp<double> eq;
  eq.c = Eigen::Vector2d(1, 1);
  eq.A = MatrixXd::Ones(1, 2);
  eq.b = VectorXd::Constant(1, -1.0);
  eq.G = MatrixXd(0, 2);
  eq.h = VectorXd(0);
  CHECK_THROWS_AS(solve_barrier(eq, 1e-3), Infeasible);
}

TEST_CASE("phase1_interior membership") {
  const auto x = phase1_interior(lp_1d(1.0, 1.0, 1.0));
  CHECK(x(0) > 1.0);

  RelaxedLp<double> simplex;
  simplex.c = Eigen::Vector2d(0, 0);
  simplex.A = MatrixXd::Ones(1, 2);
  simplex.b = VectorXd::Constant(1, 1.0);
  simplex.G = MatrixXd(0, 2);
  simplex.h = VectorXd(0);
  const auto z = phase1_interior(simplex);
  CHECK(z.minCoeff() > 0);
  CHECK(z.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("phase1_interior on random feasible LPs") {
  testutil::RandomLpSpec spec;
  spec.d_max = 6;
  spec.p_max = 3;
  spec.q_max = 8;
  spec.magnitude = 3.0;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, seed);
    const auto x = phase1_interior(gen.lp);
    const bool interior = x.minCoeff() > 0 && (gen.lp.G * x - gen.lp.h).minCoeff() > 0 &&
                          (gen.lp.num_eq() == 0 || (gen.lp.A * x - gen.lp.b).cwiseAbs().maxCoeff() < 1e-8);
    ok += interior ? 1 : 0;
  }
  CHECK(ok == 100);
}

TEST_CASE("converged solutions satisfy the interior invariants") {
  testutil::RandomLpSpec spec;
  spec.d_max = 5;
  spec.p_max = 2;
  spec.q_max = 5;
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, seed);
    for (double cutoff : {1e-2, 1e-3, 1e-6}) {
      const auto sol = solve_barrier(gen.lp, cutoff);
      REQUIRE(sol.converged);
      check_interior_invariants(gen.lp, sol);
    }
  }
}

TEST_CASE("objective is non-increasing along the mu schedule") {
  testutil::RandomLpSpec spec;
  spec.d_max = 5;
  spec.p_max = 2;
  spec.q_max = 5;
  for (std::uint64_t seed = 200; seed < 240; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, seed);
    BarrierTrace<double> trace;
    solve_barrier(gen.lp, 1e-8, 1e-9, {}, &trace);
    REQUIRE(trace.mu.size() >= 2);
    for (std::size_t k = 1; k < trace.mu.size(); ++k) {
      CHECK(trace.mu[k] < trace.mu[k - 1]);
      CHECK(trace.objective[k] <= trace.objective[k - 1] + 1e-9 * (1 + std::abs(trace.objective[k - 1])));
    }
  }
}

TEST_CASE("barrier optimum agrees with vertex enumeration at mu = 1e-8") {
  testutil::RandomLpSpec spec;
  spec.d_max = 4;
  spec.p_max = 1;
  spec.q_max = 5;  // plus the bounding row
  for (std::uint64_t seed = 300; seed < 400; ++seed) {
    const auto gen = testutil::gen_feasible_lp(spec, seed);
    const auto oracle = testutil::vertex_enumerate_lp(gen.lp);
    REQUIRE(oracle.status == SolveStatus::Optimal);
    const auto sol = solve_barrier(gen.lp, 1e-8);
    CHECK(std::abs(gen.lp.c.dot(sol.x) - oracle.objective) <= 1e-4 * (1 + std::abs(oracle.objective)));
  }
}

TEST_CASE("knapsack LP relaxation bounds the integer optimum") {
  auto milp = make_milp<double>(5, 0, 6);
  milp.c << -10, -13, -7, -8, -4;
  milp.G.row(0) << -6, -7, -4, -5, -2;
  milp.h(0) = -12;
  for (int j = 0; j < 5; ++j) {
    milp.G(j + 1, j) = -1;
    milp.h(j + 1) = -1;
  }
  milp.int_vars = {0, 1, 2, 3, 4};
  const auto relaxed = solve_barrier(milp, 1e-8);
  const auto integer = enumerate_binary(milp);
  CHECK(milp.c.dot(relaxed.x) <= integer.objective + 1e-6);
}
