#pragma once

// Benchmark families as two-stage problems. Maximization problems are stored
// negated. Every constructor lists its parameter layout; parameters are
// output-major when a family has more than one output per feature row.

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "tspo/two_stage.hpp"

namespace tspo {

/// K suppliers, M metals. theta = con, supplier-major: con(k, m) = theta[k * M + m].
///   Stage 1: min cost^T x  s.t.  con^T x >= req, x >= 0
///   Stage 2: min cost^T x + sum_k sigma_k cost_k (x_k - x1_k)  s.t.  con^T x >= req, x >= x1
struct AlloySpec {
  Eigen::VectorXd cost;   // K, > 0
  Eigen::VectorXd req;    // M, >= 0
  Eigen::VectorXd sigma;  // K, >= 0
  /// Predicted concentrations are clamped to [con_min, con_max].
  double con_min = 1e-3;
  double con_max = 1.0;
};

TwoStageProblem alloy_problem(const AlloySpec& spec);

/// Brass (2 metals) and titanium-alloy (4 metals) requirement presets with
/// ten suppliers priced 1.0, 1.1, ..., 1.9.
AlloySpec brass_preset(double sigma = 0.25);
AlloySpec titanium_preset(double sigma = 0.25);

/// theta = (f, s): profits then sizes, both of length d.
///   Stage 1: max f^T x  s.t.  s^T x <= cap, x binary
///   Stage 2: max f^T x - sigma f^T (x1 - x)  s.t.  s^T x <= cap, x <= x1, x binary
struct KnapsackSpec {
  Eigen::Index d = 10;
  double cap = 100;
  double sigma = 0.25;
  double size_min = 1e-2;
};

TwoStageProblem knapsack_problem(const KnapsackSpec& spec);

/// n nurses, `days` days, `shifts` shifts per day; x_{i*t + j*shifts + q}
/// with t = days * shifts. theta = H, the patients per shift.
///   Stage 1: max P^T x  s.t. demand, one shift per nurse per day, no night
///            shift followed by a morning shift, x binary
///   Stage 2: variables (x, u), max P^T x - (gamma o (5 - P)^2)^T u with the
///            true demand and u >= x - x1, u binary
struct NspSpec {
  Eigen::Index nurses = 15;
  Eigen::Index days = 7;
  Eigen::Index shifts = 3;
  Eigen::VectorXd P;      // preferences in {1, 2, 3, 4}, length nurses * days * shifts
  Eigen::VectorXd m;      // patients per nurse and shift, length nurses
  Eigen::VectorXd gamma;  // length nurses * days * shifts, >= 0
  /// Largest demand per shift the roster must be able to serve.
  double h_max = 10;
};

TwoStageProblem nsp_problem(const NspSpec& spec);

/// Preferences uniform on {1..4}, capacities `m`, constant gamma.
NspSpec nsp_random_spec(Eigen::Index nurses, Eigen::Index days, Eigen::Index shifts, double m, double gamma,
                        double h_max, std::uint64_t seed);

/// theta = available space (t = 1).
///   Stage 1: max profit^T x  s.t.  size^T x <= space, x binary
///   Stage 2: max profit^T x - surcharge^T |x1 - x|, linearized with u >= |x - x1|
struct StockingSpec {
  Eigen::VectorXd profit;     // selling minus purchase price
  Eigen::VectorXd size;       // > 0
  Eigen::VectorXd surcharge;  // >= 0
};

TwoStageProblem product_stocking_problem(const StockingSpec& spec);

/// Variables (x, sigma): opened facilities and overtime service. theta = demand (t = 1).
///   min f^T x + o^T sigma  s.t.  m^T x + 1^T sigma >= demand, sigma_i <= U x_i, x binary
/// Stage 2 fixes x = x1 and re-optimizes sigma at no penalty. U = demand_max.
struct FacilitySpec {
  Eigen::VectorXd fixed;     // f
  Eigen::VectorXd overtime;  // o
  Eigen::VectorXd capacity;  // m
  double demand_min = 1;
  double demand_max = 10;
};

TwoStageProblem facility_recourse_problem(const FacilitySpec& spec);

struct DimensionReport {
  Eigen::Index d = 0;            // Stage-1 variables
  Eigen::Index equalities = 0;   // p
  Eigen::Index inequalities = 0; // q, including x <= 1 rows
  Eigen::Index constraints = 0;  // p + q + d, counting x >= 0 rows
  /// Parameter rows, one feature row each. A row may carry several outputs
  /// (knapsack predicts profit and size per item), so the scalar count is
  /// params * outputs.
  Eigen::Index params = 0;
  Eigen::Index outputs = 1;
};

DimensionReport dimensions(const TwoStageProblem& problem);

}  // namespace tspo
