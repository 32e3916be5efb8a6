#pragma once

// Exact LP and MILP solving: barrier solve plus purification to a vertex for
// LPs, best-first branch and bound for MILPs, and brute force for small
// binary programs.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "tspo/barrier.hpp"
#include "tspo/milp.hpp"

namespace tspo {

enum class SolveStatus { Optimal, Infeasible, Unbounded };

const char* status_name(SolveStatus status);

struct ExactSolution {
  Eigen::VectorXd x;
  double objective = 0;
  SolveStatus status = SolveStatus::Infeasible;
  std::int64_t node_count = 0;
};

/// Variable bounds lo <= x <= hi on top of an LP; hi may be +inf.
struct Bounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Bounds nonnegative(Index d);
};

/// Exact optimum of the LP with x >= 0.
ExactSolution solve_lp_exact(const RelaxedLp<double>& lp);

/// Exact optimum of the LP restricted to the given bounds (lo >= 0 assumed).
ExactSolution solve_lp_exact(const RelaxedLp<double>& lp, const Bounds& bounds);

struct BnbNode {
  std::int64_t id;
  double bound;      // LP relaxation value at the node (+inf if infeasible)
  double incumbent;  // incumbent objective after processing the node
  bool integral;     // LP solution was integer feasible
};

struct BnbOptions {
  std::int64_t node_limit = 1000000;
  double int_tol = 1e-6;
  std::vector<BnbNode>* log = nullptr;
};

/// Best-first branch and bound on most-fractional variables. Among
/// incumbents with equal objective, keeps the lexicographically smallest x.
ExactSolution solve_milp_bnb(const StandardFormMilp<double>& milp, const BnbOptions& options = {});

/// Exhaustive scan of {0,1}^d. Every variable is treated as binary.
/// Throws TooLarge when d > 20.
ExactSolution enumerate_binary(const StandardFormMilp<double>& milp);

/// True when every variable is integer and capped below 2 by a row -x_j >= -u.
bool is_binary(const StandardFormMilp<double>& milp);

/// enumerate_binary for binary programs with at most `max_enumerate`
/// variables, solve_milp_bnb otherwise.
ExactSolution solve_milp_exact(const StandardFormMilp<double>& milp, Index max_enumerate = 14);

}  // namespace tspo
