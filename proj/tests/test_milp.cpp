#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "tspo/milp.hpp"

using namespace tspo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ParamTemplate<double> small_template() {
  ParamTemplate<double> t;
  t.skeleton = make_milp<double>(3, 1, 2);
  t.skeleton.c << 1, 1, 1;
  t.skeleton.A << 1, 2, 3;
  t.skeleton.b << 4;
  t.num_params = 2;
  t.add_vec(Block::c, 2, 0, 2.0, 1.0);
  t.add(Block::G, 1, 2, 1, -1.0, 0.5);
  t.add_vec(Block::h, 0, 1, 3.0);
  t.add(Block::A, 0, 0, 0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("instantiate identity slot") {
  ParamTemplate<double> t;
  t.skeleton = make_milp<double>(1, 0, 1);
  t.num_params = 1;
  t.add_vec(Block::h, 0, 0, 1.0);
  const auto milp = instantiate(t, VectorXd::Constant(1, 5.0));
  CHECK(milp.h(0) == 5.0);
}

TEST_CASE("instantiate beta offset only") {
  ParamTemplate<double> t;
  t.skeleton = make_milp<double>(3, 0, 0);
  t.num_params = 1;
  t.add_vec(Block::c, 2, 0, 2.0, 1.0);
  const auto milp = instantiate(t, VectorXd::Zero(1));
  CHECK(milp.c(2) == 1.0);
  CHECK(milp.c(0) == 0.0);
}

TEST_CASE("instantiate leaves non-slot entries untouched") {
  const auto t = small_template();
  VectorXd theta(2);
  theta << 3, -2;
  const auto milp = instantiate(t, theta);
  CHECK(milp.c(0) == 1.0);
  CHECK(milp.c(2) == 7.0);
  CHECK(milp.A(0, 0) == 3.0);
  CHECK(milp.A(0, 1) == 2.0);
  CHECK(milp.G(1, 2) == 2.5);
  CHECK(milp.h(0) == -6.0);
  CHECK(milp.b(0) == 4.0);
}

TEST_CASE("instantiate errors") {
  const auto t = small_template();
  CHECK_THROWS_AS(instantiate(t, VectorXd::Zero(3)), DimensionMismatch);
  VectorXd bad(2);
  bad << 1, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(instantiate(t, bad), NonFinite);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(instantiate(t, bad), NonFinite);
}

TEST_CASE("instantiate is affine in theta") {
  const auto t = small_template();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd t1(2), t2(2);
    t1 << n01(rng), n01(rng);
    t2 << n01(rng), n01(rng);
    const double lam = 0.3 + 0.05 * trial;
    const auto m1 = instantiate(t, t1);
    const auto m2 = instantiate(t, t2);
    const auto mb = instantiate(t, (lam * t1 + (1 - lam) * t2).eval());
    CHECK((mb.c - (lam * m1.c + (1 - lam) * m2.c)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mb.A - (lam * m1.A + (1 - lam) * m2.A)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mb.G - (lam * m1.G + (1 - lam) * m2.G)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mb.h - (lam * m1.h + (1 - lam) * m2.h)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("template validation catches bad slots") {
  auto t = small_template();
  CHECK_NOTHROW(validate(t));
  t.add(Block::G, 5, 0, 0, 1.0);
  CHECK_THROWS_AS(validate(t), DimensionMismatch);
  auto u = small_template();
  u.add_vec(Block::c, 0, 4, 1.0);
  CHECK_THROWS_AS(validate(u), DimensionMismatch);
}

TEST_CASE("milp validation") {
  auto m = make_milp<double>(2, 1, 1);
  CHECK_NOTHROW(validate(m));
  m.int_vars = {2};
  CHECK_THROWS_AS(validate(m), DimensionMismatch);
  m.int_vars = {};
  m.b.resize(2);
  CHECK_THROWS_AS(validate(m), DimensionMismatch);
  auto n = make_milp<double>(2, 0, 1);
  n.G(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(n), NonFinite);
}

TEST_CASE("evaluate_objective") {
  auto m = make_milp<double>(2, 0, 0);
  m.c << 1, 2;
  CHECK(evaluate_objective(m, Eigen::Vector2d(3, 4)) == 11.0);
  auto z = make_milp<double>(2, 0, 0);
  CHECK(evaluate_objective(z, Eigen::Vector2d(-8, 1e6)) == 0.0);
  CHECK_THROWS_AS(evaluate_objective(m, Eigen::Vector3d(1, 2, 3)), DimensionMismatch);
}

TEST_CASE("evaluate_objective is linear") {
  auto m = make_milp<double>(4, 0, 0);
  m.c << 1.5, -2, 0.25, 3;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd x1(4), x2(4);
    for (int j = 0; j < 4; ++j) {
      x1(j) = n01(rng);
      x2(j) = n01(rng);
    }
    const double a = n01(rng), b = n01(rng);
    const double lhs = evaluate_objective(m, (a * x1 + b * x2).eval());
    CHECK(lhs == doctest::Approx(a * evaluate_objective(m, x1) + b * evaluate_objective(m, x2)).epsilon(1e-12));
  }
}

TEST_CASE("check_feasibility boundary and violation") {
  auto m = make_milp<double>(1, 0, 1);
  m.G(0, 0) = 1;
  m.h(0) = 1;
  const auto at = check_feasibility(m, VectorXd::Constant(1, 1.0), 0.0);
  CHECK(at.feasible);
  CHECK(at.max_violation() == 0.0);
  const auto below = check_feasibility(m, VectorXd::Constant(1, 0.999), 1e-6);
  CHECK_FALSE(below.feasible);
  CHECK(below.inequality == doctest::Approx(1e-3));
}

TEST_CASE("check_feasibility families") {
  auto m = make_milp<double>(2, 1, 0);
  m.A << 1, 1;
  m.b << 1;
  m.int_vars = {0};
  const auto ok = check_feasibility(m, Eigen::Vector2d(1, 0));
  CHECK(ok.feasible);
  const auto frac = check_feasibility(m, Eigen::Vector2d(0.5, 0.5));
  CHECK_FALSE(frac.feasible);
  CHECK(frac.integrality == doctest::Approx(0.5));
  const auto neg = check_feasibility(m, Eigen::Vector2d(2, -1));
  CHECK(neg.bound == doctest::Approx(1.0));
  const auto eq = check_feasibility(m, Eigen::Vector2d(1, 1));
  CHECK(eq.equality == doctest::Approx(1.0));
}

TEST_CASE("check_feasibility on a hand-built vertex with tol 0") {
  // x1 + x2 >= 2, x1 - x2 >= 0, -x1 >= -3: vertex (1, 1) is tight on the first two rows
  auto m = make_milp<double>(2, 0, 3);
  m.G << 1, 1, 1, -1, -1, 0;
  m.h << 2, 0, -3;
  CHECK(check_feasibility(m, Eigen::Vector2d(1, 1), 0.0).feasible);
  CHECK(check_feasibility(m, Eigen::Vector2d(4, 3), 0.0).feasible == false);
  CHECK(check_feasibility(m, Eigen::Vector2d(3, 0), 0.0).feasible);
}

TEST_CASE("knapsack feasibility agrees with direct capacity check") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(5, 40);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = make_milp<double>(6, 0, 1);
    m.int_vars = {0, 1, 2, 3, 4, 5};
    std::vector<int> s(6);
    for (int j = 0; j < 6; ++j) {
      s[j] = size(rng);
      m.G(0, j) = -s[j];
    }
    m.h(0) = -100;
    const int mask = trial;
    VectorXd x(6);
    int used = 0;
    for (int j = 0; j < 6; ++j) {
      x(j) = (mask >> j) & 1;
      used += static_cast<int>(x(j)) * s[j];
    }
    CHECK(check_feasibility(m, x).feasible == (used <= 100));
  }
}
