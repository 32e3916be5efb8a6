#pragma once

// Canonical MILP representation:
//
//   minimize c^T x  s.t.  A x = b,  G x >= h,  x >= 0,  x_j integer for j in int_vars.
//
// Maximization problems are stored negated. Parameterized problems are a
// skeleton plus affine slots entry = alpha * theta_j + beta.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tspo/errors.hpp"

namespace tspo {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A decision vector in problem units.
template <typename Scalar>
using Assignment = Vec<Scalar>;

template <typename Scalar>
struct StandardFormMilp {
  Vec<Scalar> c;
  Mat<Scalar> A;
  Vec<Scalar> b;
  Mat<Scalar> G;
  Vec<Scalar> h;
  std::vector<Index> int_vars;

  Index dim() const { return c.size(); }
  Index num_eq() const { return A.rows(); }
  Index num_ineq() const { return G.rows(); }
};

/// An all-zero problem of the given shape.
template <typename Scalar>
StandardFormMilp<Scalar> make_milp(Index d, Index p, Index q) {
  StandardFormMilp<Scalar> milp;
  milp.c = Vec<Scalar>::Zero(d);
  milp.A = Mat<Scalar>::Zero(p, d);
  milp.b = Vec<Scalar>::Zero(p);
  milp.G = Mat<Scalar>::Zero(q, d);
  milp.h = Vec<Scalar>::Zero(q);
  return milp;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// Throws DimensionMismatch or NonFinite if any invariant is broken.
template <typename Scalar>
void validate(const StandardFormMilp<Scalar>& milp) {
  const Index d = milp.c.size();
  if (milp.A.cols() != d && milp.A.rows() > 0) throw DimensionMismatch("A must have d columns");
  if (milp.G.cols() != d && milp.G.rows() > 0) throw DimensionMismatch("G must have d columns");
  if (milp.b.size() != milp.A.rows()) throw DimensionMismatch("|b| must equal rows of A");
  if (milp.h.size() != milp.G.rows()) throw DimensionMismatch("|h| must equal rows of G");
  for (Index j : milp.int_vars) {
    if (j < 0 || j >= d) throw DimensionMismatch("integer index out of range");
  }
  if (!all_finite(milp.c) || !all_finite(milp.A) || !all_finite(milp.b) || !all_finite(milp.G) ||
      !all_finite(milp.h)) {
    throw NonFinite("MILP coefficients must be finite");
  }
}

enum class Block { c, A, b, G, h };

inline const char* block_name(Block block) {
  switch (block) {
    case Block::c: return "c";
    case Block::A: return "A";
    case Block::b: return "b";
    case Block::G: return "G";
    case Block::h: return "h";
  }
  return "?";
}

/// One parameter-fed entry. Vector blocks use `row` only; `col` is ignored.
template <typename Scalar>
struct Slot {
  Block block;
  Index row;
  Index col;
  Index param;
  Scalar alpha;
  Scalar beta;
};

template <typename Scalar>
struct ParamTemplate {
  StandardFormMilp<Scalar> skeleton;
  std::vector<Slot<Scalar>> slots;
  Index num_params = 0;

  void add(Block block, Index row, Index col, Index param, Scalar alpha, Scalar beta = Scalar(0)) {
    slots.push_back(Slot<Scalar>{block, row, col, param, alpha, beta});
  }
  /// Shorthand for vector blocks (c, b, h).
  void add_vec(Block block, Index row, Index param, Scalar alpha, Scalar beta = Scalar(0)) {
    add(block, row, 0, param, alpha, beta);
  }

  /// True if any slot writes into `block`.
  bool feeds(Block block) const {
    return std::any_of(slots.begin(), slots.end(), [block](const auto& s) { return s.block == block; });
  }
};

namespace detail {

template <typename Scalar>
Scalar& slot_entry(StandardFormMilp<Scalar>& milp, const Slot<Scalar>& slot) {
  switch (slot.block) {
    case Block::c: return milp.c(slot.row);
    case Block::A: return milp.A(slot.row, slot.col);
    case Block::b: return milp.b(slot.row);
    case Block::G: return milp.G(slot.row, slot.col);
    case Block::h: return milp.h(slot.row);
  }
  return milp.c(0);
}

template <typename Scalar>
bool slot_in_range(const StandardFormMilp<Scalar>& milp, const Slot<Scalar>& slot) {
  const auto in = [](Index i, Index n) { return i >= 0 && i < n; };
  switch (slot.block) {
    case Block::c: return in(slot.row, milp.c.size());
    case Block::A: return in(slot.row, milp.A.rows()) && in(slot.col, milp.A.cols());
    case Block::b: return in(slot.row, milp.b.size());
    case Block::G: return in(slot.row, milp.G.rows()) && in(slot.col, milp.G.cols());
    case Block::h: return in(slot.row, milp.h.size());
  }
  return false;
}

}  // namespace detail

/// Checks slot ranges and parameter indices against the skeleton.
template <typename Scalar>
void validate(const ParamTemplate<Scalar>& tmpl) {
  validate(tmpl.skeleton);
  for (const auto& slot : tmpl.slots) {
    if (!detail::slot_in_range(tmpl.skeleton, slot)) {
      throw DimensionMismatch(std::string("slot out of range for block ") + block_name(slot.block));
    }
    if (slot.param < 0 || slot.param >= tmpl.num_params) throw DimensionMismatch("slot parameter index out of range");
  }
}

/// Replaces every slot entry by alpha * theta_param + beta. Non-slot entries are untouched.
template <typename Scalar, typename Derived>
StandardFormMilp<Scalar> instantiate(const ParamTemplate<Scalar>& tmpl, const Eigen::MatrixBase<Derived>& theta) {
  if (theta.size() != tmpl.num_params) {
    throw DimensionMismatch("theta has " + std::to_string(theta.size()) + " entries, template expects " +
                            std::to_string(tmpl.num_params));
  }
  if (!all_finite(theta)) throw NonFinite("theta must be finite");
  StandardFormMilp<Scalar> milp = tmpl.skeleton;
  for (const auto& slot : tmpl.slots) {
    detail::slot_entry(milp, slot) = slot.alpha * Scalar(theta(slot.param)) + slot.beta;
  }
  return milp;
}

template <typename Scalar, typename Derived>
Scalar evaluate_objective(const StandardFormMilp<Scalar>& milp, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != milp.dim()) throw DimensionMismatch("assignment length differs from problem dimension");
  return milp.c.dot(x);
}

/// Largest violation of each constraint family; zero means satisfied exactly.
template <typename Scalar>
struct FeasibilityReport {
  Scalar equality = 0;     // |Ax - b|_inf
  Scalar inequality = 0;   // max(0, max_i h_i - G_i x)
  Scalar bound = 0;        // max(0, -min_j x_j)
  Scalar integrality = 0;  // max_{j in S} dist(x_j, Z)
  bool feasible = true;

  Scalar max_violation() const { return std::max({equality, inequality, bound, integrality}); }
};

template <typename Scalar, typename Derived>
FeasibilityReport<Scalar> check_feasibility(const StandardFormMilp<Scalar>& milp, const Eigen::MatrixBase<Derived>& x,
                                            Scalar tol = Scalar(1e-6)) {
  using std::abs;
  using std::round;
  if (x.size() != milp.dim()) throw DimensionMismatch("assignment length differs from problem dimension");
  FeasibilityReport<Scalar> report;
  const Vec<Scalar> xv = x;
  if (milp.num_eq() > 0) report.equality = (milp.A * xv - milp.b).cwiseAbs().maxCoeff();
  if (milp.num_ineq() > 0) report.inequality = std::max(Scalar(0), (milp.h - milp.G * xv).maxCoeff());
  if (xv.size() > 0) report.bound = std::max(Scalar(0), -xv.minCoeff());
  for (Index j : milp.int_vars) report.integrality = std::max(report.integrality, abs(xv(j) - round(xv(j))));
  report.feasible = report.equality <= tol && report.inequality <= tol && report.bound <= tol &&
                    report.integrality <= tol;
  return report;
}

}  // namespace tspo
