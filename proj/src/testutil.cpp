#include "tspo/testutil.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace tspo::testutil {

RandomLp gen_feasible_lp(const RandomLpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto pick = [&rng](Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> coef(-spec.magnitude, spec.magnitude);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Index d = pick(spec.d_min, spec.d_max);
  const Index p = std::min(pick(spec.p_min, spec.p_max), d - 1);
  const Index q = pick(spec.q_min, spec.q_max);
  const Index rows = q + (spec.bounded ? 1 : 0);

  RandomLp out;
  out.witness.resize(d);
  for (Index j = 0; j < d; ++j) out.witness(j) = 0.5 + 1.5 * unit(rng);

  auto& lp = out.lp;
  lp.c.resize(d);
  for (Index j = 0; j < d; ++j) lp.c(j) = coef(rng);
  lp.A.resize(p, d);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < d; ++j) lp.A(i, j) = coef(rng);
  lp.b = lp.A * out.witness;

  lp.G.resize(rows, d);
  lp.h.resize(rows);
  for (Index i = 0; i < q; ++i) {
    double act = 0;
    for (Index j = 0; j < d; ++j) {
      lp.G(i, j) = coef(rng);
      act += lp.G(i, j) * out.witness(j);
    }
    lp.h(i) = act - 0.1 - unit(rng);
  }
  if (spec.bounded) {
    lp.G.row(q).setConstant(-1.0);
    lp.h(q) = -(out.witness.sum() + 1.0 + static_cast<double>(d));
  }
  return out;
}

MatX finite_diff_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x0, double step) {
  MatX jac;
  for (Index j = 0; j < x0.size(); ++j) {
    VecX plus = x0, minus = x0;
    plus(j) += step;
    minus(j) -= step;
    const VecX col = (f(plus) - f(minus)) / (2.0 * step);
    if (j == 0) jac.resize(col.size(), x0.size());
    jac.col(j) = col;
  }
  return jac;
}

bool gauss_solve(MatX M, VecX r, VecX& z, double pivot_tol) {
  const Index n = M.rows();
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(M(i, k)) > std::abs(M(piv, k))) piv = i;
    if (std::abs(M(piv, k)) < pivot_tol) return false;
    if (piv != k) {
      for (Index j = 0; j < n; ++j) std::swap(M(k, j), M(piv, j));
      std::swap(r(k), r(piv));
    }
    for (Index i = k + 1; i < n; ++i) {
      const double factor = M(i, k) / M(k, k);
      if (factor == 0) continue;
      for (Index j = k; j < n; ++j) M(i, j) -= factor * M(k, j);
      r(i) -= factor * r(k);
    }
  }
  z.resize(n);
  for (Index i = n - 1; i >= 0; --i) {
    double acc = r(i);
    for (Index j = i + 1; j < n; ++j) acc -= M(i, j) * z(j);
    z(i) = acc / M(i, i);
  }
  return true;
}

namespace {

// Calls visit(subset) for every size-k subset of {0..n-1}.
template <typename Visit>
void for_each_subset(Index n, Index k, Visit&& visit) {
  if (k < 0 || k > n) return;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    visit(idx);
    Index i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Inequality rows of {G x >= h, x >= 0} as one stacked system.
struct Rows {
  MatX M;
  VecX r;
};

Rows stacked_inequalities(const RelaxedLp<double>& lp) {
  const Index d = lp.dim();
  const Index q = lp.num_ineq();
  Rows rows{MatX::Zero(q + d, d), VecX::Zero(q + d)};
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < d; ++j) rows.M(i, j) = lp.G(i, j);
    rows.r(i) = lp.h(i);
  }
  for (Index j = 0; j < d; ++j) rows.M(q + j, j) = 1.0;
  return rows;
}

// Vertices of {E z = e, M z >= r}: every choice of (d - |E|) tight M rows.
template <typename Visit>
void enumerate_vertices(const MatX& E, const VecX& e, const Rows& ineq, Index d, double tol, Visit&& visit) {
  const Index p = E.rows();
  const Index m = ineq.M.rows();
  for_each_subset(m, d - p, [&](const std::vector<Index>& tight) {
    MatX S(d, d);
    VecX rhs(d);
    for (Index i = 0; i < p; ++i) {
      for (Index j = 0; j < d; ++j) S(i, j) = E(i, j);
      rhs(i) = e(i);
    }
    for (std::size_t k = 0; k < tight.size(); ++k) {
      const Index row = p + static_cast<Index>(k);
      for (Index j = 0; j < d; ++j) S(row, j) = ineq.M(tight[k], j);
      rhs(row) = ineq.r(tight[k]);
    }
    VecX z;
    if (!gauss_solve(S, rhs, z)) return;
    for (Index i = 0; i < m; ++i) {
      double act = 0;
      for (Index j = 0; j < d; ++j) act += ineq.M(i, j) * z(j);
      if (act - ineq.r(i) < -tol * (1.0 + std::abs(ineq.r(i)))) return;
    }
    for (Index i = 0; i < p; ++i) {
      double act = 0;
      for (Index j = 0; j < d; ++j) act += E(i, j) * z(j);
      if (std::abs(act - e(i)) > tol * (1.0 + std::abs(e(i)))) return;
    }
    visit(z);
  });
}

}  // namespace

ExactSolution vertex_enumerate_lp(const RelaxedLp<double>& lp) {
  const Index d = lp.dim();
  const Index p = lp.num_eq();
  const Index q = lp.num_ineq();
  if (d > 6 || p + q + d > 20) throw TooLarge("vertex enumeration limited to d <= 6 and p + q + d <= 20");
  const double tol = 1e-9;
  const Rows ineq = stacked_inequalities(lp);

  ExactSolution best;
  best.status = SolveStatus::Infeasible;
  best.objective = std::numeric_limits<double>::infinity();
  const MatX E = p > 0 ? lp.A : MatX(0, d);
  const VecX e = p > 0 ? lp.b : VecX(0);
  enumerate_vertices(E, e, ineq, d, tol, [&](const VecX& z) {
    double obj = 0;
    for (Index j = 0; j < d; ++j) obj += lp.c(j) * z(j);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = z;
      best.status = SolveStatus::Optimal;
    }
  });
  if (best.status == SolveStatus::Infeasible) return best;

  // Extreme rays: vertices of {A r = 0, 1^T r = 1, G r >= 0, r >= 0}.
  MatX Er(p + 1, d);
  VecX er = VecX::Zero(p + 1);
  if (p > 0) Er.topRows(p) = lp.A;
  Er.row(p).setOnes();
  er(p) = 1.0;
  Rows cone = ineq;
  cone.r.setZero();
  bool unbounded = false;
  enumerate_vertices(Er, er, cone, d, tol, [&](const VecX& r) {
    double slope = 0;
    for (Index j = 0; j < d; ++j) slope += lp.c(j) * r(j);
    if (slope < -1e-9) unbounded = true;
  });
  if (unbounded) {
    best.status = SolveStatus::Unbounded;
    best.objective = -std::numeric_limits<double>::infinity();
  }
  return best;
}

}  // namespace tspo::testutil
