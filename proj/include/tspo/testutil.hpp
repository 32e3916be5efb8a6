#pragma once

// Oracles and generators for the property suites. Everything here is a
// separate code path from the solvers under test: the linear algebra is a
// hand-rolled Gaussian elimination, not Eigen's decompositions.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

#include "tspo/barrier.hpp"
#include "tspo/exact.hpp"

namespace tspo::testutil {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct RandomLpSpec {
  Index d_min = 2, d_max = 4;
  Index p_min = 0, p_max = 1;
  Index q_min = 1, q_max = 4;
  double magnitude = 1.0;
  /// Adds the row -sum(x) >= -U so the LP has a finite optimum.
  bool bounded = true;
};

struct RandomLp {
  RelaxedLp<double> lp;
  VecX witness;  // G w - h >= 0.1, w >= 0.5, A w = b
};

RandomLp gen_feasible_lp(const RandomLpSpec& spec, std::uint64_t seed);

/// Central differences; column j is (f(x0 + step e_j) - f(x0 - step e_j)) / (2 step).
MatX finite_diff_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x0, double step = 1e-5);

/// Best basic feasible solution by enumerating every basis. Throws TooLarge
/// when d > 6 or p + q + d > 20.
ExactSolution vertex_enumerate_lp(const RelaxedLp<double>& lp);

/// Solves the square system M z = r by Gaussian elimination with partial
/// pivoting. Returns false when a pivot falls below `pivot_tol`.
bool gauss_solve(MatX M, VecX r, VecX& z, double pivot_tol = 1e-10);

}  // namespace tspo::testutil
