#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "tspo/kkt.hpp"
#include "tspo/testutil.hpp"

using namespace tspo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kMu = 1e-3;

double rel_err(const MatrixXd& got, const MatrixXd& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-6);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// x*(lp) at fixed mu, warm-started from `base` when that point is still interior.
VectorXd resolve(const RelaxedLp<double>& lp, const BarrierSolution<double>& base) {
  const bool interior = base.x.minCoeff() > 0 && (lp.num_ineq() == 0 || (lp.G * base.x - lp.h).minCoeff() > 0);
  if (interior) {
    const auto sol = solve_fixed_mu(lp, base.mu, base, 1e-13, 200);
    if (sol.converged) return sol.x;
  }
  return solve_barrier(lp, base.mu, 1e-13).x;
}

// Finite-difference Jacobian of x* with respect to one flattened block.
MatrixXd fd_block(const RelaxedLp<double>& lp, const BarrierSolution<double>& base, Block block) {
  const Index d = lp.dim();
  VectorXd theta0;
  std::function<RelaxedLp<double>(const VectorXd&)> build;
  switch (block) {
    case Block::c:
      theta0 = lp.c;
      build = [&](const VectorXd& t) { auto l = lp; l.c = t; return l; };
      break;
    case Block::b:
      theta0 = lp.b;
      build = [&](const VectorXd& t) { auto l = lp; l.b = t; return l; };
      break;
    case Block::h:
      theta0 = lp.h;
      build = [&](const VectorXd& t) { auto l = lp; l.h = t; return l; };
      break;
    case Block::G: {
      theta0.resize(lp.num_ineq() * d);
      for (Index l = 0; l < lp.num_ineq(); ++l)
        for (Index r = 0; r < d; ++r) theta0(l * d + r) = lp.G(l, r);
      build = [&, d](const VectorXd& t) {
        auto l = lp;
        for (Index i = 0; i < l.num_ineq(); ++i)
          for (Index r = 0; r < d; ++r) l.G(i, r) = t(i * d + r);
        return l;
      };
      break;
    }
    case Block::A: {
      theta0.resize(lp.num_eq() * d);
      for (Index i = 0; i < lp.num_eq(); ++i)
        for (Index k = 0; k < d; ++k) theta0(i * d + k) = lp.A(i, k);
      build = [&, d](const VectorXd& t) {
        auto l = lp;
        for (Index i = 0; i < l.num_eq(); ++i)
          for (Index k = 0; k < d; ++k) l.A(i, k) = t(i * d + k);
        return l;
      };
      break;
    }
  }
  return testutil::finite_diff_jacobian([&](const VectorXd& t) { return resolve(build(t), base); }, theta0);
}

RelaxedLp<double> make_lp(const VectorXd& c, const MatrixXd& A, const VectorXd& b, const MatrixXd& G,
                          const VectorXd& h) {
  return RelaxedLp<double>{c, A, b, G, h};
}

// f_x evaluated directly from its definition.
VectorXd barrier_gradient(const RelaxedLp<double>& lp, double mu, const VectorXd& x) {
  VectorXd g = lp.c;
  for (Index j = 0; j < x.size(); ++j) g(j) -= mu / x(j);
  for (Index i = 0; i < lp.num_ineq(); ++i) {
    const double s = lp.G.row(i).dot(x) - lp.h(i);
    for (Index j = 0; j < x.size(); ++j) g(j) -= mu * lp.G(i, j) / s;
  }
  return g;
}

testutil::RandomLpSpec block_spec(Index p_min) {
  testutil::RandomLpSpec spec;
  spec.d_min = 2;
  spec.d_max = 5;
  spec.p_min = p_min;
  spec.p_max = 2;
  spec.q_min = 1;
  spec.q_max = 4;  // plus the bounding row
  spec.magnitude = 1.0;
  return spec;
}

}  // namespace

TEST_CASE("hessian_fxx hand values") {
  const auto lp = make_lp(VectorXd::Constant(1, 1.0), MatrixXd(0, 1), VectorXd(0), MatrixXd::Ones(1, 1),
                          VectorXd::Constant(1, 0.5));
  BarrierSolution<double> sol;
  sol.x = VectorXd::Ones(1);
  sol.mu = 1.0;
  CHECK(hessian_fxx(lp, sol).H(0, 0) == doctest::Approx(5.0));

  const auto free_lp = make_lp(Eigen::Vector2d(1, 1), MatrixXd(0, 2), VectorXd(0), MatrixXd(0, 2), VectorXd(0));
  sol.x = Eigen::Vector2d(2, 4);
  sol.mu = 0.5;
  const MatrixXd H = hessian_fxx(free_lp, sol).H;
  CHECK(H(0, 0) == doctest::Approx(0.125));
  CHECK(H(1, 1) == doctest::Approx(0.5 / 16));
  CHECK(H(0, 1) == 0.0);

  sol.x = Eigen::Vector2d(-1, 4);
  CHECK_THROWS_AS(hessian_fxx(free_lp, sol), NotInterior);
  BarrierSolution<double> tight;
  tight.x = VectorXd::Constant(1, 0.5);
  tight.mu = 1.0;
  CHECK_THROWS_AS(hessian_fxx(lp, tight), NotInterior);
}

TEST_CASE("hessian_fxx matches finite differences of f_x") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gen = testutil::gen_feasible_lp(block_spec(0), 500 + trial);
    BarrierSolution<double> sol;
    sol.x = gen.witness;
    sol.mu = 0.3;
    const MatrixXd H = hessian_fxx(gen.lp, sol).H;
    const MatrixXd fd = testutil::finite_diff_jacobian(
        [&](const VectorXd& x) { return barrier_gradient(gen.lp, sol.mu, x); }, gen.witness);
    CHECK(rel_err(H, fd) <= 1e-5);
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * H.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("hessian is positive definite at converged points") {
  // At mu = 1e-8 the spectrum spans more than 1e16, so the check runs in
  // extended precision with the templated Hessian and Jacobi scaling.
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto gen = testutil::gen_feasible_lp(block_spec(0), seed);
    for (double mu : {1e-2, 1e-5, 1e-8}) {
      const auto sol = solve_barrier(gen.lp, mu);
      const MatrixXd H = hessian_fxx(gen.lp, sol).H;
      CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
      RelaxedLp<long double> lpl{gen.lp.c.cast<long double>(), gen.lp.A.cast<long double>(),
                                 gen.lp.b.cast<long double>(), gen.lp.G.cast<long double>(),
                                 gen.lp.h.cast<long double>()};
      BarrierSolution<long double> soll;
      soll.x = sol.x.cast<long double>();
      soll.mu = mu;
      const MatL Hl = hessian_fxx(lpl, soll).H;
      const VecL scale = Hl.diagonal().cwiseSqrt().cwiseInverse();
      Eigen::SelfAdjointEigenSolver<MatL> eig(scale.asDiagonal() * Hl * scale.asDiagonal());
      CHECK(eig.eigenvalues().minCoeff() > 0);
    }
  }
}

TEST_CASE("grad_wrt_h: scalar problem against the bisection root") {
  // min c x - mu ln x - mu ln(x - h): stationarity c - mu/x - mu/(x - h) = 0
  const double c = 2.0, mu = 0.05;
  const auto root = [&](double h) {
    double lo = std::max(h, 0.0) + 1e-14, hi = 100.0;
    for (int i = 0; i < 300; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double g = c - mu / mid - mu / (mid - h);
      (g < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double h = 1.5;
  const auto lp = make_lp(VectorXd::Constant(1, c), MatrixXd(0, 1), VectorXd(0), MatrixXd::Ones(1, 1),
                          VectorXd::Constant(1, h));
  const auto sol = solve_barrier(lp, mu, 1e-13);
  CHECK(sol.x(0) == doctest::Approx(root(h)).epsilon(1e-10));
  const KktSystem<double> kkt(lp, sol);
  const double step = 1e-5;
  const double fd = (root(h + step) - root(h - step)) / (2 * step);
  CHECK(std::abs(grad_wrt_h(kkt)(0, 0) - fd) <= 1e-4 * std::abs(fd));
}

TEST_CASE("p = 0 reductions are bitwise equal to -H^-1 f_.x") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto gen = testutil::gen_feasible_lp(block_spec(0), seed * 7 + 1);
    auto lp = gen.lp;
    lp.A = MatrixXd(0, lp.dim());
    lp.b = VectorXd(0);
    const auto sol = solve_barrier(lp, kMu);
    const KktSystem<double> kkt(lp, sol);
    const Eigen::LLT<MatrixXd> llt(hessian_fxx(lp, sol).H);
    const MatrixXd direct_h = llt.solve(-kkt.f_hx());
    const MatrixXd direct_G = llt.solve(-kkt.f_Gx());
    CHECK((grad_wrt_h(kkt) - direct_h).cwiseAbs().maxCoeff() == 0.0);
    CHECK((grad_wrt_G(kkt) - direct_G).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("grad_wrt_h through a covering problem with lower bounds from h") {
  // min (1 + s) cost^T x  s.t. con^T x >= req, x >= x1 (rows of h)
  MatrixXd G(3, 2);
  G << 0.6, 0.3, 1, 0, 0, 1;
  const VectorXd h = Eigen::Vector3d(1.0, 0.4, 0.2);
  const auto lp = make_lp(Eigen::Vector2d(2.5, 3.5), MatrixXd(0, 2), VectorXd(0), G, h);
  const auto sol = solve_barrier(lp, kMu, 1e-13);
  const KktSystem<double> kkt(lp, sol);
  const MatrixXd got = grad_wrt_h(kkt);
  CHECK(rel_err(got.rightCols(2), fd_block(lp, sol, Block::h).rightCols(2)) <= 1e-3);
}

TEST_CASE("grad_wrt_G: scalar and symmetric cases") {
  const auto lp = make_lp(VectorXd::Constant(1, 1.0), MatrixXd(0, 1), VectorXd(0), MatrixXd::Constant(1, 1, 2.0),
                          VectorXd::Constant(1, 1.0));
  const auto sol = solve_barrier(lp, kMu, 1e-13);
  const KktSystem<double> kkt(lp, sol);
  CHECK(rel_err(grad_wrt_G(kkt), fd_block(lp, sol, Block::G)) <= 1e-4);

  // two identical variables: swapping them maps the problem to itself
  MatrixXd G(2, 2);
  G << 1, 1, 0.5, 0.5;
  const auto sym = make_lp(Eigen::Vector2d(1, 1), MatrixXd(0, 2), VectorXd(0), G, Eigen::Vector2d(1, 0.2));
  const auto ssol = solve_barrier(sym, kMu, 1e-13);
  const MatrixXd J = grad_wrt_G(KktSystem<double>(sym, ssol));
  for (Index l = 0; l < 2; ++l) {
    CHECK(J(0, l * 2 + 0) == doctest::Approx(J(1, l * 2 + 1)).epsilon(1e-9));
    CHECK(J(0, l * 2 + 1) == doctest::Approx(J(1, l * 2 + 0)).epsilon(1e-9));
  }
}

TEST_CASE("grad_wrt_G: covering LP with concentrations in G") {
  MatrixXd G(2, 3);
  G << 0.3, 0.5, 0.2, 0.4, 0.1, 0.6;
  const auto lp = make_lp(Eigen::Vector3d(2, 3, 2.5), MatrixXd(0, 3), VectorXd(0), G, Eigen::Vector2d(1.0, 0.8));
  const auto sol = solve_barrier(lp, kMu, 1e-13);
  CHECK(rel_err(grad_wrt_G(KktSystem<double>(lp, sol)), fd_block(lp, sol, Block::G)) <= 1e-3);
}

TEST_CASE("grad_wrt_b hand cases") {
  // x = b forces dx/db = 1
  const auto forced = make_lp(VectorXd::Constant(1, 1.0), MatrixXd::Ones(1, 1), VectorXd::Constant(1, 2.0),
                              MatrixXd(0, 1), VectorXd(0));
  const auto fsol = solve_barrier(forced, kMu);
  CHECK(grad_wrt_b(KktSystem<double>(forced, fsol))(0, 0) == doctest::Approx(1.0).epsilon(1e-9));

  // x1 + x2 = b: the sensitivities of x1 and x2 add up to one
  const auto split = make_lp(Eigen::Vector2d(1, 2), MatrixXd::Ones(1, 2), VectorXd::Constant(1, 3.0),
                             MatrixXd(0, 2), VectorXd(0));
  const auto ssol = solve_barrier(split, 0.1);
  const MatrixXd J = grad_wrt_b(KktSystem<double>(split, ssol));
  CHECK(J.col(0).sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rel_err(J, fd_block(split, ssol, Block::b)) <= 1e-4);

  const auto none = make_lp(Eigen::Vector2d(1, 2), MatrixXd(0, 2), VectorXd(0), MatrixXd::Ones(1, 2),
                            VectorXd::Constant(1, 1.0));
  CHECK_THROWS_AS(grad_wrt_b(KktSystem<double>(none, solve_barrier(none, kMu))), SingularSystem);
}

TEST_CASE("grad_wrt_A: x = b / A") {
  const double a = 2.0, b = 3.0;
  const auto lp = make_lp(VectorXd::Constant(1, 1.0), MatrixXd::Constant(1, 1, a), VectorXd::Constant(1, b),
                          MatrixXd(0, 1), VectorXd(0));
  const auto sol = solve_barrier(lp, 1e-6);
  const double got = grad_wrt_A(KktSystem<double>(lp, sol))(0, 0);
  CHECK(std::abs(got - (-b / (a * a))) <= 1e-3 * b / (a * a));
}

TEST_CASE("grad_wrt_A: zero dual leaves only the constraint path") {
  // with y = 0 the y e_k term vanishes and only -x_k e_i drives the solve
  const auto lp = make_lp(Eigen::Vector2d(0, 0), MatrixXd::Ones(1, 2), VectorXd::Constant(1, 2.0), MatrixXd(0, 2),
                          VectorXd(0));
  auto sol = solve_barrier(lp, kMu);
  sol.y.setZero();
  const KktSystem<double> kkt(lp, sol);
  const MatrixXd r1 = MatrixXd::Zero(2, 2);
  MatrixXd r2(1, 2);
  r2 << -sol.x(0), -sol.x(1);
  CHECK((grad_wrt_A(kkt) - kkt.solve_x(r1, r2)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("grad_wrt_c hand cases") {
  // min c x - mu ln x: x = mu / c
  const double c = 4.0, mu = 0.2;
  const auto lp = make_lp(VectorXd::Constant(1, c), MatrixXd(0, 1), VectorXd(0), MatrixXd(0, 1), VectorXd(0));
  const auto sol = solve_barrier(lp, mu, 1e-13);
  CHECK(sol.x(0) == doctest::Approx(mu / c).epsilon(1e-10));
  CHECK(std::abs(grad_wrt_c(lp, sol)(0, 0) + mu / (c * c)) <= 1e-6);

  // scaling direction: dx/dc * c against finite differences of x(lambda c)
  MatrixXd G(1, 2);
  G << 1, 1;
  const auto two = make_lp(Eigen::Vector2d(1, 2), MatrixXd(0, 2), VectorXd(0), G, VectorXd::Constant(1, 1.0));
  const auto tsol = solve_barrier(two, 0.05, 1e-13);
  const VectorXd along = grad_wrt_c(two, tsol) * two.c;
  const MatrixXd fd = testutil::finite_diff_jacobian(
      [&](const VectorXd& lam) { auto l = two; l.c *= lam(0); return resolve(l, tsol); }, VectorXd::Ones(1));
  CHECK(rel_err(along, fd) <= 1e-4);

  // x pinned by a square equality system: the objective is constant on the feasible set
  MatrixXd A(2, 2);
  A << 1, 1, 1, -1;
  const auto pinned = make_lp(Eigen::Vector2d(0.3, 0.7), A, Eigen::Vector2d(3, 1), MatrixXd(0, 2), VectorXd(0));
  const auto psol = solve_barrier(pinned, kMu);
  CHECK(grad_wrt_c(pinned, psol).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("perturbing c along the row space of A leaves x unchanged") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto gen = testutil::gen_feasible_lp(block_spec(1), 40 + seed);
    const auto sol = solve_barrier(gen.lp, kMu);
    const MatrixXd J = grad_wrt_c(gen.lp, sol);
    CHECK((J * gen.lp.A.transpose()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("lifted and reduced routes for dx/dc agree") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto gen = testutil::gen_feasible_lp(block_spec(0), 900 + seed);
    const auto sol = solve_barrier(gen.lp, kMu);
    const MatrixXd lifted = grad_wrt_c(gen.lp, sol);
    const MatrixXd reduced = grad_wrt_c_reduced(KktSystem<double>(gen.lp, sol));
    CHECK(rel_err(reduced, lifted) <= 1e-6);
  }
}

TEST_CASE("every block matches finite differences on random instances") {
  for (Block block : {Block::c, Block::h, Block::G, Block::b, Block::A}) {
    const bool needs_eq = block == Block::b || block == Block::A;
    int passed = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto gen = testutil::gen_feasible_lp(block_spec(needs_eq ? 1 : 0), 1000 + seed);
      const auto sol = solve_barrier(gen.lp, kMu, 1e-13);
      BlockRequest want{block == Block::c, block == Block::A, block == Block::b, block == Block::G,
                        block == Block::h};
      const auto grads = block_gradients(gen.lp, sol, want);
      const MatrixXd& J = block == Block::c   ? grads.dx_dc
                          : block == Block::A ? grads.dx_dA
                          : block == Block::b ? grads.dx_db
                          : block == Block::G ? grads.dx_dG
                                              : grads.dx_dh;
      const double err = rel_err(J, fd_block(gen.lp, sol, block));
      passed += err <= 1e-3 ? 1 : 0;
    }
    INFO("block " << block_name(block));
    CHECK(passed == 20);
  }
}

TEST_CASE("vector-Jacobian products equal upstream^T times the full Jacobians") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto gen = testutil::gen_feasible_lp(block_spec(1), 2000 + seed);
    const auto& lp = gen.lp;
    const auto sol = solve_barrier(lp, kMu);
    const KktSystem<double> kkt(lp, sol);
    VectorXd v(lp.dim());
    for (Index j = 0; j < v.size(); ++j) v(j) = n01(rng);
    const auto cot = vjp(kkt, v);
    const auto full = block_gradients(lp, sol);
    const Index d = lp.dim();
    CHECK(rel_err(cot.c, full.dx_dc.transpose() * v) <= 1e-6);
    CHECK(rel_err(cot.b, full.dx_db.transpose() * v) <= 1e-8);
    CHECK(rel_err(cot.h, full.dx_dh.transpose() * v) <= 1e-8);
    const VectorXd gG = full.dx_dG.transpose() * v;
    const VectorXd gA = full.dx_dA.transpose() * v;
    for (Index l = 0; l < lp.num_ineq(); ++l)
      for (Index r = 0; r < d; ++r) CHECK(std::abs(cot.G(l, r) - gG(l * d + r)) <= 1e-8 * (1 + gG.cwiseAbs().maxCoeff()));
    for (Index i = 0; i < lp.num_eq(); ++i)
      for (Index k = 0; k < d; ++k) CHECK(std::abs(cot.A(i, k) - gA(i * d + k)) <= 1e-8 * (1 + gA.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("pullback through template slots") {
  ParamTemplate<double> tmpl;
  tmpl.skeleton = make_milp<double>(2, 0, 2);
  tmpl.skeleton.G << 1, 1, 1, 0;
  tmpl.skeleton.h << 1, 0.1;
  tmpl.skeleton.c << 1, 2;
  tmpl.num_params = 2;
  tmpl.add_vec(Block::c, 0, 0, -1.0, 3.0);
  tmpl.add(Block::G, 0, 1, 0, 0.5, 0.5);
  tmpl.add_vec(Block::h, 1, 1, 2.0);
  const VectorXd theta = Eigen::Vector2d(1.0, 0.1);
  const VectorXd v = Eigen::Vector2d(0.7, -0.4);
  const auto loss = [&](const VectorXd& t) {
    const auto lp = relax(instantiate(tmpl, t));
    return VectorXd::Constant(1, v.dot(solve_barrier(lp, kMu, 1e-13).x));
  };
  const auto lp = relax(instantiate(tmpl, theta));
  const auto sol = solve_barrier(lp, kMu, 1e-13);
  const VectorXd got = pullback(tmpl, vjp(KktSystem<double>(lp, sol), v));
  const MatrixXd fd = testutil::finite_diff_jacobian(loss, theta);
  CHECK(rel_err(got.transpose(), fd) <= 1e-4);
}
