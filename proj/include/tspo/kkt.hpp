#pragma once

// Implicit differentiation of the barrier optimum x*(c, A, b, G, h) at fixed mu.
//
// With f(x) = c^T x - mu sum ln x_j - mu sum ln(G_i x - h_i), the optimum obeys
//   f_x(x) - A^T y = 0,  A x = b.
// Differentiating in any parameter theta gives
//   [ H  -A^T ] [dx]   [ -f_theta,x              ]
//   [ A   0   ] [dy] = [ -(d/dtheta)(A x - b)    ]
// with H = f_xx. Every block below is one right-hand side of this system;
// H is factorized once and the Schur complement A H^{-1} A^T is reused.

#include <Eigen/Dense>

#include <vector>

#include "tspo/barrier.hpp"
#include "tspo/errors.hpp"
#include "tspo/milp.hpp"

namespace tspo {

template <typename Scalar>
struct BarrierHessian {
  Mat<Scalar> H;
};

/// Full Jacobians; a block is empty (0 columns) when not requested.
/// dx_dG column l*d + r holds dx/dG_{lr}; dx_dA column i*d + k holds dx/dA_{ik}.
template <typename Scalar>
struct BlockGradients {
  Mat<Scalar> dx_dc;
  Mat<Scalar> dx_db;
  Mat<Scalar> dx_dh;
  Mat<Scalar> dx_dG;
  Mat<Scalar> dx_dA;
};

/// Gradients of a scalar loss L(x*) with respect to every parameter block,
/// given the upstream vector dL/dx*.
template <typename Scalar>
struct BlockCotangents {
  Vec<Scalar> c;
  Mat<Scalar> A;
  Vec<Scalar> b;
  Mat<Scalar> G;
  Vec<Scalar> h;
};

namespace detail {

template <typename Scalar>
void require_interior(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol) {
  if (sol.x.size() != lp.dim()) throw DimensionMismatch("solution dimension differs from LP");
  if (!(sol.mu > 0)) throw NotInterior("mu must be positive");
  if (lp.dim() > 0 && !(sol.x.minCoeff() > 0)) throw NotInterior("x is not strictly positive");
  if (lp.num_ineq() > 0 && !((lp.G * sol.x - lp.h).minCoeff() > 0)) throw NotInterior("G x - h is not strictly positive");
}

}  // namespace detail

/// f_xx at the solution: mu x_j^-2 on the diagonal plus mu G^T diag(s^-2) G.
template <typename Scalar>
BarrierHessian<Scalar> hessian_fxx(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol) {
  detail::require_interior(lp, sol);
  const Scalar mu = sol.mu;
  BarrierHessian<Scalar> out;
  out.H = Mat<Scalar>::Zero(lp.dim(), lp.dim());
  out.H.diagonal() = mu * sol.x.array().square().inverse().matrix();
  if (lp.num_ineq() > 0) {
    const Vec<Scalar> inv_s = (lp.G * sol.x - lp.h).cwiseInverse();
    const Mat<Scalar> scaled = inv_s.asDiagonal() * lp.G;
    out.H.noalias() += mu * (scaled.transpose() * scaled);
  }
  return out;
}

/// Factorized KKT system at a barrier optimum.
template <typename Scalar>
class KktSystem {
 public:
  KktSystem(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol)
      : lp_(lp), sol_(sol), H_(hessian_fxx(lp, sol).H), llt_(H_) {
    if (llt_.info() != Eigen::Success) throw SingularSystem("f_xx is not positive definite");
    slack_ = lp.num_ineq() > 0 ? Vec<Scalar>(lp.G * sol.x - lp.h) : Vec<Scalar>(0);
    if (lp.num_eq() > 0) {
      hinv_at_ = llt_.solve(lp.A.transpose());
      Mat<Scalar> schur = lp.A * hinv_at_;
      schur.diagonal().array() += Scalar(1e-12);
      ldlt_.compute(schur);
      if (ldlt_.info() != Eigen::Success) throw SingularSystem("A H^-1 A^T is singular");
    }
  }

  const Mat<Scalar>& hessian() const { return H_; }
  const Vec<Scalar>& slack() const { return slack_; }
  const RelaxedLp<Scalar>& lp() const { return lp_; }
  const BarrierSolution<Scalar>& solution() const { return sol_; }
  Scalar mu() const { return sol_.mu; }

  /// Solves [H -A^T; A 0][u; v] = [r1; r2] column-wise and returns u.
  Mat<Scalar> solve_x(const Mat<Scalar>& r1, const Mat<Scalar>& r2) const {
    Mat<Scalar> u = llt_.solve(r1);
    if (lp_.num_eq() > 0) {
      const Mat<Scalar> v = ldlt_.solve(r2 - lp_.A * u);
      u.noalias() += hinv_at_ * v;
    }
    return u;
  }

  /// Same as solve_x but returns the multiplier block v.
  Mat<Scalar> solve_y(const Mat<Scalar>& r1, const Mat<Scalar>& r2) const {
    if (lp_.num_eq() == 0) return Mat<Scalar>(0, r1.cols());
    const Mat<Scalar> u = llt_.solve(r1);
    return ldlt_.solve(r2 - lp_.A * u);
  }

  /// P v with P = H^-1 - H^-1 A^T (A H^-1 A^T)^-1 A H^-1 (symmetric).
  Vec<Scalar> project(const Vec<Scalar>& v) const {
    return solve_x(v, Mat<Scalar>::Zero(lp_.num_eq(), 1));
  }

  /// (A H^-1 A^T)^-1 A H^-1 v.
  Vec<Scalar> dual_sensitivity(const Vec<Scalar>& v) const {
    if (lp_.num_eq() == 0) return Vec<Scalar>(0);
    return ldlt_.solve(lp_.A * llt_.solve(v));
  }

  /// Mixed partials d f_x / d h: column l holds -mu G_l / s_l^2.
  Mat<Scalar> f_hx() const {
    const Index q = lp_.num_ineq();
    Mat<Scalar> out(lp_.dim(), q);
    for (Index l = 0; l < q; ++l) out.col(l) = -mu() * lp_.G.row(l).transpose() / (slack_(l) * slack_(l));
    return out;
  }

  /// Mixed partials d f_x / d G_{lr}, column l*d + r.
  Mat<Scalar> f_Gx() const {
    const Index q = lp_.num_ineq();
    const Index d = lp_.dim();
    Mat<Scalar> out(d, q * d);
    for (Index l = 0; l < q; ++l) {
      const Scalar s = slack_(l);
      for (Index r = 0; r < d; ++r) {
        auto col = out.col(l * d + r);
        col = mu() * lp_.G.row(l).transpose() * sol_.x(r) / (s * s);
        col(r) -= mu() / s;
      }
    }
    return out;
  }

 private:
  RelaxedLp<Scalar> lp_;
  BarrierSolution<Scalar> sol_;
  Mat<Scalar> H_;
  Eigen::LLT<Mat<Scalar>> llt_;
  Vec<Scalar> slack_;
  Mat<Scalar> hinv_at_;
  Eigen::LDLT<Mat<Scalar>> ldlt_;
};

/// dx/dh = (H^-1 A^T (A H^-1 A^T)^-1 A H^-1 - H^-1) f_hx.
template <typename Scalar>
Mat<Scalar> grad_wrt_h(const KktSystem<Scalar>& kkt) {
  return kkt.solve_x(-kkt.f_hx(), Mat<Scalar>::Zero(kkt.lp().num_eq(), kkt.lp().num_ineq()));
}

/// dx/dG with the same projector applied to f_Gx.
template <typename Scalar>
Mat<Scalar> grad_wrt_G(const KktSystem<Scalar>& kkt) {
  const Index cols = kkt.lp().num_ineq() * kkt.lp().dim();
  return kkt.solve_x(-kkt.f_Gx(), Mat<Scalar>::Zero(kkt.lp().num_eq(), cols));
}

/// dx/db = H^-1 A^T (A H^-1 A^T)^-1.
template <typename Scalar>
Mat<Scalar> grad_wrt_b(const KktSystem<Scalar>& kkt) {
  const Index p = kkt.lp().num_eq();
  if (p == 0) throw SingularSystem("no equality constraints to differentiate");
  return kkt.solve_x(Mat<Scalar>::Zero(kkt.lp().dim(), p), Mat<Scalar>::Identity(p, p));
}

/// dx/dA_{ik}. The stationarity row picks up +y_i e_k (from -d(A^T)/dA_ik y) and
/// the feasibility row -x_k e_i.
template <typename Scalar>
Mat<Scalar> grad_wrt_A(const KktSystem<Scalar>& kkt) {
  const Index p = kkt.lp().num_eq();
  const Index d = kkt.lp().dim();
  if (p == 0) throw SingularSystem("no equality constraints to differentiate");
  const auto& x = kkt.solution().x;
  const auto& y = kkt.solution().y;
  Mat<Scalar> r1 = Mat<Scalar>::Zero(d, p * d);
  Mat<Scalar> r2 = Mat<Scalar>::Zero(p, p * d);
  for (Index i = 0; i < p; ++i) {
    for (Index k = 0; k < d; ++k) {
      r1(k, i * d + k) = y(i);
      r2(i, i * d + k) = -x(k);
    }
  }
  return kkt.solve_x(r1, r2);
}

/// dx/dc by the lifted system over x' = (x, s) with A' = [A 0; G -I]:
///   [ -mu X'^-2  A'^T ] [dx']   [ I ]
///   [  A'        0    ] [dy'] = [ 0 ]
/// keeping the first d rows and columns.
template <typename Scalar>
Mat<Scalar> grad_wrt_c(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol) {
  detail::require_interior(lp, sol);
  const Index d = lp.dim();
  const Index p = lp.num_eq();
  const Index q = lp.num_ineq();
  const Index n = d + q;
  const Index m = p + q;
  Vec<Scalar> xs(n);
  xs.head(d) = sol.x;
  if (q > 0) xs.tail(q) = lp.G * sol.x - lp.h;

  Mat<Scalar> K = Mat<Scalar>::Zero(n + m, n + m);
  K.topLeftCorner(n, n).diagonal() = -sol.mu * xs.array().square().inverse().matrix();
  Mat<Scalar> lifted = Mat<Scalar>::Zero(m, n);
  if (p > 0) lifted.topLeftCorner(p, d) = lp.A;
  if (q > 0) {
    lifted.bottomLeftCorner(q, d) = lp.G;
    lifted.bottomRightCorner(q, q) = -Mat<Scalar>::Identity(q, q);
  }
  K.topRightCorner(n, m) = lifted.transpose();
  K.bottomLeftCorner(m, n) = lifted;

  Mat<Scalar> rhs = Mat<Scalar>::Zero(n + m, d);
  rhs.topRows(d) = Mat<Scalar>::Identity(d, d);
  Eigen::FullPivLU<Mat<Scalar>> lu(K);
  if (!lu.isInvertible()) throw SingularSystem("lifted KKT system is singular");
  const Mat<Scalar> sol_all = lu.solve(rhs);
  return sol_all.topRows(d);
}

/// dx/dc by the reduced system: -(H^-1 - H^-1 A^T (A H^-1 A^T)^-1 A H^-1).
template <typename Scalar>
Mat<Scalar> grad_wrt_c_reduced(const KktSystem<Scalar>& kkt) {
  const Index d = kkt.lp().dim();
  return kkt.solve_x(-Mat<Scalar>::Identity(d, d), Mat<Scalar>::Zero(kkt.lp().num_eq(), d));
}

struct BlockRequest {
  bool c = true;
  bool A = true;
  bool b = true;
  bool G = true;
  bool h = true;
};

template <typename Scalar>
BlockGradients<Scalar> block_gradients(const RelaxedLp<Scalar>& lp, const BarrierSolution<Scalar>& sol,
                                       BlockRequest want = {}) {
  KktSystem<Scalar> kkt(lp, sol);
  BlockGradients<Scalar> out;
  const Index d = lp.dim();
  out.dx_dc = want.c ? grad_wrt_c(lp, sol) : Mat<Scalar>(d, 0);
  out.dx_dh = want.h ? grad_wrt_h(kkt) : Mat<Scalar>(d, 0);
  out.dx_dG = want.G ? grad_wrt_G(kkt) : Mat<Scalar>(d, 0);
  out.dx_db = want.b && lp.num_eq() > 0 ? grad_wrt_b(kkt) : Mat<Scalar>(d, 0);
  out.dx_dA = want.A && lp.num_eq() > 0 ? grad_wrt_A(kkt) : Mat<Scalar>(d, 0);
  return out;
}

/// Vector-Jacobian products: upstream^T dx/d(block) for every block, without
/// materializing any Jacobian. Cost is one projection plus O(q d) arithmetic.
template <typename Scalar>
BlockCotangents<Scalar> vjp(const KktSystem<Scalar>& kkt, const Vec<Scalar>& upstream) {
  const auto& lp = kkt.lp();
  const auto& x = kkt.solution().x;
  const auto& y = kkt.solution().y;
  const Scalar mu = kkt.mu();
  const Index d = lp.dim();
  const Index p = lp.num_eq();
  const Index q = lp.num_ineq();
  if (upstream.size() != d) throw DimensionMismatch("upstream length differs from LP dimension");

  const Vec<Scalar> a = kkt.project(upstream);             // dL/dx = a^T r1 + beta^T r2
  const Vec<Scalar> beta = kkt.dual_sensitivity(upstream);  // (A H^-1 A^T)^-1 A H^-1 v
  BlockCotangents<Scalar> out;
  out.c = -a;
  out.h = Vec<Scalar>::Zero(q);
  out.G = Mat<Scalar>::Zero(q, d);
  if (q > 0) {
    const Vec<Scalar> ga = lp.G * a;
    const auto& s = kkt.slack();
    for (Index l = 0; l < q; ++l) {
      const Scalar s2 = s(l) * s(l);
      out.h(l) = mu * ga(l) / s2;
      out.G.row(l) = -(mu * ga(l) / s2) * x.transpose() + (mu / s(l)) * a.transpose();
    }
  }
  out.b = beta;
  out.A = Mat<Scalar>::Zero(p, d);
  if (p > 0) out.A = y * a.transpose() - beta * x.transpose();
  return out;
}

/// Pulls block cotangents back through a template's affine slots:
/// dL/dtheta_j = sum over slots feeding j of alpha * dL/d(entry).
template <typename Scalar>
Vec<Scalar> pullback(const ParamTemplate<Scalar>& tmpl, const BlockCotangents<Scalar>& cot) {
  Vec<Scalar> out = Vec<Scalar>::Zero(tmpl.num_params);
  for (const auto& slot : tmpl.slots) {
    Scalar g = 0;
    switch (slot.block) {
      case Block::c: g = cot.c(slot.row); break;
      case Block::A: g = cot.A(slot.row, slot.col); break;
      case Block::b: g = cot.b(slot.row); break;
      case Block::G: g = cot.G(slot.row, slot.col); break;
      case Block::h: g = cot.h(slot.row); break;
    }
    out(slot.param) += slot.alpha * g;
  }
  return out;
}

}  // namespace tspo
