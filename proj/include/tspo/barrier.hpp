#pragma once

// Log-barrier relaxation of a standard-form MILP:
//
//   minimize c^T x - mu * sum_j ln x_j - mu * sum_i ln s_i   s.t.  A x = b,  G x - s = h
//
// solved by damped Newton steps on the equality-constrained barrier function
// along a geometric mu schedule. Slacks are eliminated (s = Gx - h), so the
// Newton matrix is the reduced Hessian f_xx of the barrier objective.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <type_traits>
#include <vector>

#include "tspo/errors.hpp"
#include "tspo/milp.hpp"

namespace tspo {

/// The continuous relaxation of a StandardFormMilp; integrality is dropped.
template <typename Scalar>
struct RelaxedLp {
  Vec<Scalar> c;
  Mat<Scalar> A;
  Vec<Scalar> b;
  Mat<Scalar> G;
  Vec<Scalar> h;

  Index dim() const { return c.size(); }
  Index num_eq() const { return A.rows(); }
  Index num_ineq() const { return G.rows(); }
};

template <typename Scalar>
struct BarrierSolution {
  Vec<Scalar> x;  // primal, strictly positive
  Vec<Scalar> s;  // inequality slacks G x - h, strictly positive
  Vec<Scalar> y;  // equality multipliers: f_x(x) - A^T y = 0
  Scalar mu = 0;
  int iterations = 0;
  bool converged = false;
};

template <typename Scalar>
struct BarrierOptions {
  Scalar gamma = Scalar(0.2);
  Scalar fraction_to_boundary = Scalar(0.995);
  /// Iterates larger than this multiple of (1 + |h|_inf + |b|_inf) count as diverged.
  Scalar divergence_norm = Scalar(1e8);
  /// Relative stationarity tolerance on intermediate mu stages.
  Scalar stage_tol = Scalar(1e-6);
  int max_newton = 200;
};

/// (mu, objective) after each completed stage of the schedule.
template <typename Scalar>
struct BarrierTrace {
  std::vector<Scalar> mu;
  std::vector<Scalar> objective;
};

template <typename Scalar>
RelaxedLp<Scalar> relax(const StandardFormMilp<Scalar>& milp) {
  return RelaxedLp<Scalar>{milp.c, milp.A, milp.b, milp.G, milp.h};
}

namespace detail {

// minimize c^T z - mu * sum_{j: pos_j} ln z_j - mu * sum_i ln (M z - m)_i   s.t.  E z = e
template <typename Scalar>
struct BarrierCore {
  Vec<Scalar> c;
  Mat<Scalar> E;
  Vec<Scalar> e;
  Mat<Scalar> M;
  Vec<Scalar> m;
  Vec<Scalar> pos;  // 1 where z_j carries its own log barrier, else 0
};

template <typename Scalar>
bool strictly_interior(const BarrierCore<Scalar>& core, const Vec<Scalar>& z) {
  for (Index j = 0; j < z.size(); ++j) {
    if (core.pos(j) > 0 && !(z(j) > 0)) return false;
  }
  if (core.M.rows() > 0) {
    const Vec<Scalar> r = core.M * z - core.m;
    for (Index i = 0; i < r.size(); ++i) {
      if (!(r(i) > 0)) return false;
    }
  }
  return true;
}

template <typename Scalar>
Scalar barrier_value(const BarrierCore<Scalar>& core, Scalar mu, const Vec<Scalar>& z) {
  using std::log;
  Scalar f = core.c.dot(z);
  for (Index j = 0; j < z.size(); ++j) {
    if (core.pos(j) > 0) f -= mu * log(z(j));
  }
  if (core.M.rows() > 0) {
    const Vec<Scalar> r = core.M * z - core.m;
    f -= mu * r.array().log().sum();
  }
  return f;
}

// Largest alpha in (0, inf] keeping z + alpha dz strictly interior.
template <typename Scalar>
Scalar max_step(const BarrierCore<Scalar>& core, const Vec<Scalar>& z, const Vec<Scalar>& dz) {
  Scalar alpha = std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < z.size(); ++j) {
    if (core.pos(j) > 0 && dz(j) < 0) alpha = std::min(alpha, -z(j) / dz(j));
  }
  if (core.M.rows() > 0) {
    const Vec<Scalar> r = core.M * z - core.m;
    const Vec<Scalar> dr = core.M * dz;
    for (Index i = 0; i < r.size(); ++i) {
      if (dr(i) < 0) alpha = std::min(alpha, -r(i) / dr(i));
    }
  }
  return alpha;
}

template <typename Scalar>
struct NewtonResult {
  Vec<Scalar> y;
  Scalar stationarity = 0;
  Scalar eq_residual = 0;
  int iterations = 0;
  bool converged = false;
};

// Centers z at a fixed mu. `stop_early` is consulted after every accepted step.
template <typename Scalar>
NewtonResult<Scalar> newton_center(const BarrierCore<Scalar>& core, Scalar mu, Vec<Scalar>& z, Scalar tol_stat,
                                   Scalar tol_eq, const BarrierOptions<Scalar>& opt,
                                   const std::function<bool(const Vec<Scalar>&)>& stop_early = {}) {
  using std::abs;
  const Index n = z.size();
  const Index p = core.E.rows();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  NewtonResult<Scalar> out;
  out.y = Vec<Scalar>::Zero(p);

  Mat<Scalar> H(n, n);
  Vec<Scalar> g(n);
  for (int iter = 0; iter <= opt.max_newton; ++iter) {
    // gradient and Hessian
    g = core.c;
    H.setZero();
    for (Index j = 0; j < n; ++j) {
      if (core.pos(j) > 0) {
        g(j) -= mu / z(j);
        H(j, j) += mu / (z(j) * z(j));
      }
    }
    if (core.M.rows() > 0) {
      const Vec<Scalar> inv_r = (core.M * z - core.m).cwiseInverse();
      g.noalias() -= mu * (core.M.transpose() * inv_r);
      const Mat<Scalar> scaled = inv_r.asDiagonal() * core.M;
      H.noalias() += mu * (scaled.transpose() * scaled);
    }

    Eigen::LLT<Mat<Scalar>> llt(H);
    if (llt.info() != Eigen::Success) {
      const Scalar reg = Scalar(1e-10) * (Scalar(1) + H.diagonal().cwiseAbs().maxCoeff());
      llt.compute(H + reg * Mat<Scalar>::Identity(n, n));
      if (llt.info() != Eigen::Success) throw NumericalFailure("barrier Hessian is not positive definite");
    }
    // [H -E^T; E 0][dz; y] = [-g; e - E z] by the Schur complement, plus two
    // rounds of iterative refinement against the ill-conditioning of H near the boundary
    Mat<Scalar> hinv_et;
    Eigen::LDLT<Mat<Scalar>> ldlt;
    if (p > 0) {
      hinv_et = llt.solve(core.E.transpose());
      Mat<Scalar> schur = core.E * hinv_et;
      schur.diagonal().array() += Scalar(1e-12);
      ldlt.compute(schur);
      if (ldlt.info() != Eigen::Success) throw NumericalFailure("equality Schur complement factorization failed");
    }
    const auto kkt_solve = [&](const Vec<Scalar>& r1, const Vec<Scalar>& r2, Vec<Scalar>& u, Vec<Scalar>& v) {
      u = llt.solve(r1);
      if (p > 0) {
        v = ldlt.solve(r2 - core.E * u);
        u.noalias() += hinv_et * v;
      } else {
        v = Vec<Scalar>(0);
      }
    };
    const Vec<Scalar> rp = p > 0 ? Vec<Scalar>(core.e - core.E * z) : Vec<Scalar>(0);
    const Vec<Scalar> r1 = -g;
    Vec<Scalar> dz, du, dv;
    kkt_solve(r1, rp, dz, out.y);
    for (int refine = 0; refine < 2; ++refine) {
      Vec<Scalar> res1 = r1 - H * dz;
      if (p > 0) res1.noalias() += core.E.transpose() * out.y;
      const Vec<Scalar> res2 = p > 0 ? Vec<Scalar>(rp - core.E * dz) : Vec<Scalar>(0);
      kkt_solve(res1, res2, du, dv);
      dz += du;
      if (p > 0) out.y += dv;
    }
    out.eq_residual = p > 0 ? rp.cwiseAbs().maxCoeff() : Scalar(0);
    out.stationarity = n > 0 ? (g - core.E.transpose() * out.y).cwiseAbs().maxCoeff() : Scalar(0);
    if (p == 0) out.stationarity = n > 0 ? g.cwiseAbs().maxCoeff() : Scalar(0);
    out.iterations = iter;
    if (out.stationarity <= tol_stat && out.eq_residual <= tol_eq) {
      out.converged = true;
      return out;
    }
    if (iter == opt.max_newton) break;

    // damped step: fraction-to-boundary, then Armijo backtracking on the barrier value.
    // Inside the quadratic-convergence region of the self-concordant f / mu
    // (Newton decrement below 0.2) the full step is taken, since the barrier
    // value no longer resolves the decrease in floating point.
    Scalar alpha = std::min(Scalar(1), opt.fraction_to_boundary * max_step(core, z, dz));
    const Scalar f0 = barrier_value(core, mu, z);
    const Scalar slope = g.dot(dz);
    const bool feasible_now = p == 0 || out.eq_residual <= tol_eq;
    if (feasible_now && -slope / mu < Scalar(0.04) && alpha == Scalar(1)) {
      const Vec<Scalar> trial = z + dz;
      if (strictly_interior(core, trial)) {
        z = trial;
        if (stop_early && stop_early(z)) {
          out.iterations = iter + 1;
          return out;
        }
        continue;
      }
    }
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Vec<Scalar> trial = z + alpha * dz;
      if (strictly_interior(core, trial)) {
        const Scalar f1 = barrier_value(core, mu, trial);
        if (f1 <= f0 + Scalar(1e-4) * alpha * std::min(slope, Scalar(0)) + Scalar(100) * eps * (Scalar(1) + abs(f0))) {
          z = trial;
          accepted = true;
          break;
        }
      }
      alpha *= Scalar(0.5);
    }
    if (!accepted) break;
    if (z.cwiseAbs().maxCoeff() > opt.divergence_norm) {
      throw Unbounded("barrier iterates diverged; the relaxation appears unbounded");
    }
    if (stop_early && stop_early(z)) {
      out.iterations = iter + 1;
      return out;
    }
  }
  return out;
}

template <typename Scalar>
BarrierCore<Scalar> main_core(const RelaxedLp<Scalar>& lp) {
  BarrierCore<Scalar> core;
  core.c = lp.c;
  core.E = lp.A.rows() > 0 ? lp.A : Mat<Scalar>(0, lp.dim());
  core.e = lp.b;
  core.M = lp.G.rows() > 0 ? lp.G : Mat<Scalar>(0, lp.dim());
  core.m = lp.h;
  core.pos = Vec<Scalar>::Ones(lp.dim());
  return core;
}

template <typename Scalar>
Scalar inf_norm(const Vec<Scalar>& v) {
  return v.size() > 0 ? v.cwiseAbs().maxCoeff() : Scalar(0);
}

template <typename Scalar>
void validate_lp(const RelaxedLp<Scalar>& lp) {
  const Index d = lp.dim();
  if ((lp.A.rows() > 0 && lp.A.cols() != d) || lp.b.size() != lp.A.rows()) throw DimensionMismatch("bad A/b shape");
  if ((lp.G.rows() > 0 && lp.G.cols() != d) || lp.h.size() != lp.G.rows()) throw DimensionMismatch("bad G/h shape");
  if (!all_finite(lp.c) || !all_finite(lp.A) || !all_finite(lp.b) || !all_finite(lp.G) || !all_finite(lp.h)) {
    throw NonFinite("LP coefficients must be finite");
  }
}

template <typename Scalar>
BarrierSolution<Scalar> package(const RelaxedLp<Scalar>& lp, const Vec<Scalar>& x, const NewtonResult<Scalar>& nr,
                                Scalar mu, int iterations) {
  BarrierSolution<Scalar> sol;
  sol.x = x;
  sol.s = lp.G.rows() > 0 ? Vec<Scalar>(lp.G * x - lp.h) : Vec<Scalar>(0);
  sol.y = nr.y;
  sol.mu = mu;
  sol.iterations = iterations;
  sol.converged = nr.converged;
  return sol;
}

}  // namespace detail

/// A strictly interior point: x > 0, G x > h, A x = b.
///
/// Minimizes a single auxiliary slack added to every constraint that the
/// starting point (the projection of the all-ones vector onto A x = b) does
/// not satisfy with margin. Throws Infeasible when the slack cannot be driven
/// below zero.
template <typename Scalar>
Assignment<Scalar> phase1_interior(const RelaxedLp<Scalar>& lp, const BarrierOptions<Scalar>& opt = {}) {
  detail::validate_lp(lp);
  const Index d = lp.dim();
  const Index p = lp.num_eq();
  const Index q = lp.num_ineq();
  using detail::inf_norm;

  Vec<Scalar> x0 = Vec<Scalar>::Ones(d);
  if (p > 0) {
    const Vec<Scalar> r = lp.b - lp.A * x0;
    x0 += lp.A.completeOrthogonalDecomposition().solve(r);
    const Scalar resid = inf_norm<Scalar>(lp.A * x0 - lp.b);
    if (resid > Scalar(1e-9) * (Scalar(1) + inf_norm(lp.b))) throw Infeasible("equality constraints are inconsistent");
  }
  const Scalar scale = Scalar(1) + inf_norm(x0);
  const Scalar margin = Scalar(1e-3) * scale;
  const Vec<Scalar> slack = q > 0 ? Vec<Scalar>(lp.G * x0 - lp.h) : Vec<Scalar>(0);

  std::vector<Index> weak_x, weak_g;
  Scalar worst = std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < d; ++j) {
    if (x0(j) < margin) weak_x.push_back(j);
    worst = std::min(worst, x0(j));
  }
  for (Index i = 0; i < q; ++i) {
    if (slack(i) < margin) weak_g.push_back(i);
    worst = std::min(worst, slack(i));
  }
  if (weak_x.empty() && weak_g.empty()) return x0;

  // z = (x, t); rows: weak x_j + t > 0, G_i x (+ t) - h_i > 0, t + 1 > 0, R - x_j > 0
  const Scalar radius = Scalar(1e6) * (scale + inf_norm(lp.h) + inf_norm(lp.b));
  detail::BarrierCore<Scalar> core;
  core.c = Vec<Scalar>::Zero(d + 1);
  core.c(d) = 1;
  core.E = Mat<Scalar>::Zero(p, d + 1);
  if (p > 0) core.E.leftCols(d) = lp.A;
  core.e = lp.b;
  core.pos = Vec<Scalar>::Ones(d + 1);
  core.pos(d) = 0;
  const Index rows = static_cast<Index>(weak_x.size()) + q + 1 + d;
  core.M = Mat<Scalar>::Zero(rows, d + 1);
  core.m = Vec<Scalar>::Zero(rows);
  Index row = 0;
  for (Index j : weak_x) {
    core.pos(j) = 0;
    core.M(row, j) = 1;
    core.M(row, d) = 1;
    ++row;
  }
  if (q > 0) {
    core.M.block(row, 0, q, d) = lp.G;
    core.m.segment(row, q) = lp.h;
    for (Index i : weak_g) core.M(row + i, d) = 1;
    row += q;
  }
  core.M(row, d) = 1;
  core.m(row) = -1;
  ++row;
  for (Index j = 0; j < d; ++j, ++row) {
    core.M(row, j) = -1;
    core.m(row) = -radius;
  }

  Vec<Scalar> z(d + 1);
  z.head(d) = x0;
  z(d) = margin - worst;

  const auto original_interior = [&](const Vec<Scalar>& zz) {
    const Vec<Scalar> x = zz.head(d);
    if (!(x.minCoeff() > 0)) return false;
    if (q > 0 && !((lp.G * x - lp.h).minCoeff() > 0)) return false;
    return true;
  };
  const Scalar tol_eq = Scalar(1e-9) * (Scalar(1) + inf_norm(lp.b));
  // the box keeps phase 1 bounded, and its center can lie past divergence_norm
  BarrierOptions<Scalar> boxed = opt;
  boxed.divergence_norm = std::numeric_limits<Scalar>::infinity();
  for (Scalar mu = Scalar(1); mu > Scalar(1e-12); mu *= opt.gamma) {
    detail::newton_center<Scalar>(core, mu, z, Scalar(1e-6), tol_eq, boxed);
    if (z(d) < 0 && original_interior(z)) return z.head(d);
  }
  throw Infeasible("no strictly interior point exists (phase-1 slack " + std::to_string(double(z(d))) + ")");
}

/// Solves the barrier problem at a single mu, from `warm` if given.
template <typename Scalar>
BarrierSolution<Scalar> solve_fixed_mu(const RelaxedLp<Scalar>& lp, Scalar mu,
                                       const std::optional<std::type_identity_t<BarrierSolution<Scalar>>>& warm = std::nullopt,
                                       Scalar tol = Scalar(1e-9), int max_newton = 200,
                                       const BarrierOptions<Scalar>& opt = {}) {
  if (!(mu > 0)) throw NumericalFailure("mu must be positive");
  detail::validate_lp(lp);
  Vec<Scalar> x;
  if (warm) {
    x = warm->x;
    if (x.size() != lp.dim()) throw DimensionMismatch("warm start has wrong dimension");
  } else {
    x = phase1_interior(lp, opt);
  }
  const auto core = detail::main_core(lp);
  if (!detail::strictly_interior(core, x)) throw NotInterior("warm start is not strictly interior");
  BarrierOptions<Scalar> local = opt;
  local.max_newton = max_newton;
  local.divergence_norm = opt.divergence_norm * (Scalar(1) + detail::inf_norm(lp.h) + detail::inf_norm(lp.b));
  const auto nr = detail::newton_center<Scalar>(core, mu, x, tol * (Scalar(1) + detail::inf_norm(lp.c)),
                                                tol * (Scalar(1) + detail::inf_norm(lp.b)), local);
  return detail::package(lp, x, nr, mu, nr.iterations);
}

/// Follows mu_k = max(1, |c|_inf) * gamma^k down to `mu_cutoff` and returns the
/// centered point at mu = mu_cutoff exactly.
template <typename Scalar>
BarrierSolution<Scalar> solve_barrier(const RelaxedLp<Scalar>& lp, Scalar mu_cutoff, Scalar tol = Scalar(1e-9),
                                      const BarrierOptions<Scalar>& opt = {}, BarrierTrace<Scalar>* trace = nullptr) {
  if (!(mu_cutoff > 0)) throw NumericalFailure("mu cutoff must be positive");
  detail::validate_lp(lp);
  Vec<Scalar> x = phase1_interior(lp, opt);
  const auto core = detail::main_core(lp);
  BarrierOptions<Scalar> local = opt;
  local.divergence_norm = opt.divergence_norm * (Scalar(1) + detail::inf_norm(lp.h) + detail::inf_norm(lp.b));
  const Scalar cscale = Scalar(1) + detail::inf_norm(lp.c);
  const Scalar bscale = Scalar(1) + detail::inf_norm(lp.b);

  Scalar mu = std::max(Scalar(1), detail::inf_norm(lp.c));
  int total = 0;
  detail::NewtonResult<Scalar> nr;
  for (;;) {
    const bool last = !(mu * opt.gamma > mu_cutoff) || mu <= mu_cutoff;
    if (last) mu = mu_cutoff;
    const Scalar stat_tol = (last ? tol : opt.stage_tol) * cscale;
    nr = detail::newton_center<Scalar>(core, mu, x, stat_tol, tol * bscale, local);
    total += nr.iterations;
    if (trace) {
      trace->mu.push_back(mu);
      trace->objective.push_back(lp.c.dot(x));
    }
    if (last) break;
    mu *= opt.gamma;
  }
  return detail::package(lp, x, nr, mu, total);
}

template <typename Scalar>
BarrierSolution<Scalar> solve_barrier(const StandardFormMilp<Scalar>& milp, Scalar mu_cutoff, Scalar tol = Scalar(1e-9),
                                      const BarrierOptions<Scalar>& opt = {}, BarrierTrace<Scalar>* trace = nullptr) {
  return solve_barrier(relax(milp), mu_cutoff, tol, opt, trace);
}

/// |f_x(x) - A^T y|_inf at a solution.
template <typename Scalar>
Scalar stationarity_residual(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol) {
  Vec<Scalar> g = lp.c - sol.mu * sol.x.cwiseInverse();
  if (lp.num_ineq() > 0) g -= sol.mu * (lp.G.transpose() * sol.s.cwiseInverse());
  if (lp.num_eq() > 0) g -= lp.A.transpose() * sol.y;
  return detail::inf_norm(g);
}

}  // namespace tspo
