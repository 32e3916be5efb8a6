#include "tspo/problems.hpp"

#include <cmath>
#include <random>

namespace tspo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionMismatch(message);
}

void all_integer(StandardFormMilp<double>& milp) {
  milp.int_vars.resize(static_cast<std::size_t>(milp.dim()));
  for (Index j = 0; j < milp.dim(); ++j) milp.int_vars[static_cast<std::size_t>(j)] = j;
}

// Appends rows -x_j >= -1 for j in [first, first + count).
void add_upper_bounds(StandardFormMilp<double>& milp, Index row, Index first, Index count) {
  for (Index j = 0; j < count; ++j) {
    milp.G(row + j, first + j) = -1;
    milp.h(row + j) = -1;
  }
}

}  // namespace

TwoStageProblem alloy_problem(const AlloySpec& spec) {
  const Index K = spec.cost.size(), M = spec.req.size();
  require(K > 0 && M > 0, "alloy needs suppliers and metals");
  require(spec.sigma.size() == K, "alloy sigma must have one entry per supplier");
  require((spec.cost.array() > 0).all() && (spec.req.array() >= 0).all() && (spec.sigma.array() >= 0).all(),
          "alloy needs cost > 0, req >= 0, sigma >= 0");
  require(spec.con_min > 0 && spec.con_min <= spec.con_max, "alloy clamp must satisfy 0 < con_min <= con_max");

  TwoStageProblem p;
  p.name = "alloy";
  p.t = K * M;
  p.k = 1;
  p.stage1.skeleton = make_milp<double>(K, 0, M);
  p.stage1.skeleton.c = spec.cost;
  p.stage1.skeleton.h = spec.req;
  p.stage1.num_params = K * M;
  for (Index k = 0; k < K; ++k)
    for (Index m = 0; m < M; ++m) p.stage1.add(Block::G, m, k, k * M + m, 1.0);
  p.theta_lo = VectorXd::Constant(K * M, spec.con_min);
  p.theta_hi = VectorXd::Constant(K * M, spec.con_max);
  p.dx1_blocks = {Block::G};
  p.dx2_blocks = {Block::h};

  const VectorXd surcharge = spec.sigma.cwiseProduct(spec.cost);
  p.stage2 = [K, M, spec, surcharge](const VectorXd& con) {
    ParamTemplate<double> t;
    t.skeleton = make_milp<double>(K, 0, M + K);
    t.skeleton.c = spec.cost + surcharge;
    for (Index k = 0; k < K; ++k)
      for (Index m = 0; m < M; ++m) t.skeleton.G(m, k) = con(k * M + m);
    t.skeleton.h.head(M) = spec.req;
    t.skeleton.G.bottomRows(K).setIdentity();
    t.num_params = K;
    for (Index k = 0; k < K; ++k) t.add_vec(Block::h, M + k, k, 1.0);
    return t;
  };
  p.penalty = [surcharge](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    return surcharge.dot((x2 - x1).cwiseMax(0.0));
  };
  p.dpreg_dx2 = [spec, surcharge](const VectorXd&, const VectorXd&, const VectorXd&) {
    return VectorXd(spec.cost + surcharge);
  };
  p.dpreg_dx1 = [surcharge](const VectorXd&, const VectorXd&, const VectorXd&) { return VectorXd(-surcharge); };
  validate(p);
  return p;
}

namespace {

AlloySpec alloy_preset(VectorXd req, double sigma) {
  AlloySpec spec;
  spec.cost = VectorXd::LinSpaced(10, 1.0, 1.9);
  spec.req = std::move(req);
  spec.sigma = VectorXd::Constant(10, sigma);
  return spec;
}

}  // namespace

AlloySpec brass_preset(double sigma) { return alloy_preset(Eigen::Vector2d(627.54, 369.72), sigma); }

AlloySpec titanium_preset(double sigma) { return alloy_preset(Eigen::Vector4d(0.8, 60, 40, 2.5), sigma); }

TwoStageProblem knapsack_problem(const KnapsackSpec& spec) {
  const Index d = spec.d;
  require(d > 0, "knapsack needs items");
  require(spec.cap > 0 && spec.sigma >= 0 && spec.size_min > 0, "knapsack needs cap > 0, sigma >= 0, size_min > 0");

  TwoStageProblem p;
  p.name = "knapsack";
  p.t = d;
  p.k = 2;
  p.maximize = true;
  auto& sk = p.stage1.skeleton;
  sk = make_milp<double>(d, 0, d + 1);
  sk.h(0) = -spec.cap;
  add_upper_bounds(sk, 1, 0, d);
  all_integer(sk);
  p.stage1.num_params = 2 * d;
  for (Index j = 0; j < d; ++j) {
    p.stage1.add_vec(Block::c, j, j, -1.0);
    p.stage1.add(Block::G, 0, j, d + j, -1.0);
  }
  p.theta_lo = VectorXd(2 * d);
  p.theta_lo << VectorXd::Zero(d), VectorXd::Constant(d, spec.size_min);
  p.theta_hi = VectorXd::Constant(2 * d, kInf);
  p.dx1_blocks = {Block::c, Block::G};
  p.dx2_blocks = {Block::h};

  const double sigma = spec.sigma, cap = spec.cap;
  p.stage2 = [d, sigma, cap](const VectorXd& theta) {
    ParamTemplate<double> t;
    t.skeleton = make_milp<double>(d, 0, d + 1);
    t.skeleton.c = -(1 + sigma) * theta.head(d);
    t.skeleton.G.row(0) = -theta.tail(d).transpose();
    t.skeleton.h(0) = -cap;
    add_upper_bounds(t.skeleton, 1, 0, d);
    all_integer(t.skeleton);
    t.num_params = d;
    for (Index j = 0; j < d; ++j) t.add_vec(Block::h, 1 + j, j, -1.0);
    return t;
  };
  p.penalty = [d, sigma](const VectorXd& x1, const VectorXd& x2, const VectorXd& theta) {
    return sigma * theta.head(d).dot((x1 - x2).cwiseMax(0.0));
  };
  p.dpreg_dx2 = [d, sigma](const VectorXd&, const VectorXd&, const VectorXd& theta) {
    return VectorXd(-(1 + sigma) * theta.head(d));
  };
  p.dpreg_dx1 = [d, sigma](const VectorXd&, const VectorXd&, const VectorXd& theta) {
    return VectorXd(sigma * theta.head(d));
  };
  validate(p);
  return p;
}

namespace {

// Shared Stage-1/Stage-2 roster rows over the first d columns of `milp`.
// Demand rows come first (rows [0, t)), then no-night-then-morning rows.
void roster_rows(StandardFormMilp<double>& milp, const NspSpec& spec) {
  const Index n = spec.nurses, days = spec.days, s = spec.shifts, t = days * s;
  Index eq = 0, row = t;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < t; ++j) milp.G(j, i * t + j) = spec.m(i);
    for (Index j = 0; j < days; ++j) {
      for (Index q = 0; q < s; ++q) milp.A(eq, i * t + s * j + q) = 1;
      milp.b(eq++) = 1;
    }
    for (Index j = 0; j + 1 < days; ++j) {
      milp.G(row, i * t + s * j + s - 1) = -1;
      milp.G(row, i * t + s * j + s) = -1;
      milp.h(row++) = -1;
    }
  }
}

}  // namespace

TwoStageProblem nsp_problem(const NspSpec& spec) {
  const Index n = spec.nurses, days = spec.days, s = spec.shifts;
  const Index t = days * s, d = n * t;
  require(n > 0 && days > 0 && s > 0, "nurse rostering needs nurses, days and shifts");
  require(spec.P.size() == d && spec.gamma.size() == d && spec.m.size() == n, "nurse rostering vector sizes");
  require(((spec.P.array() == 1) || (spec.P.array() == 2) || (spec.P.array() == 3) || (spec.P.array() == 4)).all(),
          "preferences must lie in {1, 2, 3, 4}");
  require((spec.m.array() > 0).all() && (spec.gamma.array() >= 0).all() && spec.h_max >= 0,
          "nurse rostering needs m > 0, gamma >= 0, h_max >= 0");
  // Enough nurses to cover every shift of a day at h_max, and room for an
  // interior point of the relaxation.
  const double m_min = spec.m.minCoeff();
  if (static_cast<double>(s) * std::ceil(spec.h_max / m_min) > static_cast<double>(n) ||
      spec.m.sum() <= static_cast<double>(s) * spec.h_max) {
    throw Infeasible("nurse capacity cannot cover h_max patients in every shift");
  }

  const Index q_roster = t + n * (days - 1);
  TwoStageProblem p;
  p.name = "nsp";
  p.t = t;
  p.k = 1;
  p.maximize = true;
  auto& sk = p.stage1.skeleton;
  sk = make_milp<double>(d, n * days, q_roster + d);
  sk.c = -spec.P;
  roster_rows(sk, spec);
  add_upper_bounds(sk, q_roster, 0, d);
  all_integer(sk);
  p.stage1.num_params = t;
  for (Index j = 0; j < t; ++j) p.stage1.add_vec(Block::h, j, j, 1.0);
  p.theta_lo = VectorXd::Zero(t);
  p.theta_hi = VectorXd::Constant(t, spec.h_max);
  p.dx1_blocks = {Block::h};
  p.dx2_blocks = {Block::h};

  const VectorXd weight = spec.gamma.cwiseProduct((5.0 - spec.P.array()).square().matrix());
  p.stage2 = [spec, d, t, q_roster, weight](const VectorXd& H) {
    ParamTemplate<double> tm;
    auto& m2 = tm.skeleton;
    m2 = make_milp<double>(2 * d, spec.nurses * spec.days, q_roster + 3 * d);
    m2.c << -spec.P, weight;
    roster_rows(m2, spec);
    m2.h.head(t) = H;
    add_upper_bounds(m2, q_roster, 0, 2 * d);
    // u_i - x_i >= -x1_i
    for (Index i = 0; i < d; ++i) {
      m2.G(q_roster + 2 * d + i, d + i) = 1;
      m2.G(q_roster + 2 * d + i, i) = -1;
    }
    all_integer(m2);
    tm.num_params = d;
    for (Index i = 0; i < d; ++i) tm.add_vec(Block::h, q_roster + 2 * d + i, i, -1.0);
    return tm;
  };
  p.penalty = [weight](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    return weight.dot((x2 - x1).cwiseMax(0.0));
  };
  p.dpreg_dx2 = [spec, weight](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    return VectorXd(-spec.P + (x2.array() >= x1.array()).cast<double>().matrix().cwiseProduct(weight));
  };
  p.dpreg_dx1 = [weight](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    return VectorXd(-(x2.array() >= x1.array()).cast<double>().matrix().cwiseProduct(weight));
  };
  validate(p);
  return p;
}

NspSpec nsp_random_spec(Index nurses, Index days, Index shifts, double m, double gamma, double h_max,
                        std::uint64_t seed) {
  NspSpec spec;
  spec.nurses = nurses;
  spec.days = days;
  spec.shifts = shifts;
  const Index d = nurses * days * shifts;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pref(1, 4);
  spec.P.resize(d);
  for (Index i = 0; i < d; ++i) spec.P(i) = pref(rng);
  spec.m = VectorXd::Constant(nurses, m);
  spec.gamma = VectorXd::Constant(d, gamma);
  spec.h_max = h_max;
  return spec;
}

TwoStageProblem product_stocking_problem(const StockingSpec& spec) {
  const Index d = spec.profit.size();
  require(d > 0 && spec.size.size() == d && spec.surcharge.size() == d, "stocking vectors must share a length");
  require((spec.size.array() > 0).all() && (spec.surcharge.array() >= 0).all(),
          "stocking needs sizes > 0 and surcharges >= 0");

  TwoStageProblem p;
  p.name = "stocking";
  p.t = 1;
  p.k = 1;
  p.maximize = true;
  auto& sk = p.stage1.skeleton;
  sk = make_milp<double>(d, 0, 1 + d);
  sk.c = -spec.profit;
  sk.G.row(0) = -spec.size.transpose();
  add_upper_bounds(sk, 1, 0, d);
  all_integer(sk);
  p.stage1.num_params = 1;
  p.stage1.add_vec(Block::h, 0, 0, -1.0);
  p.theta_lo = VectorXd::Constant(1, 1e-3 * spec.size.sum());
  p.theta_hi = VectorXd::Constant(1, spec.size.sum());
  p.dx1_blocks = {Block::h};
  p.dx2_blocks = {Block::h};

  p.stage2 = [spec, d](const VectorXd& space) {
    ParamTemplate<double> tm;
    auto& m2 = tm.skeleton;
    m2 = make_milp<double>(2 * d, 0, 1 + 2 * d + 2 * d);
    m2.c << -spec.profit, spec.surcharge;
    m2.G.row(0).head(d) = -spec.size.transpose();
    m2.h(0) = -space(0);
    add_upper_bounds(m2, 1, 0, 2 * d);
    const Index r = 1 + 2 * d;
    tm.num_params = d;
    for (Index i = 0; i < d; ++i) {
      m2.G(r + i, d + i) = 1;  // u - x >= -x1
      m2.G(r + i, i) = -1;
      tm.add_vec(Block::h, r + i, i, -1.0);
      m2.G(r + d + i, d + i) = 1;  // u + x >= x1
      m2.G(r + d + i, i) = 1;
      tm.add_vec(Block::h, r + d + i, i, 1.0);
    }
    all_integer(m2);
    return tm;
  };
  p.penalty = [spec](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    return spec.surcharge.dot((x1 - x2).cwiseAbs());
  };
  p.dpreg_dx2 = [spec](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    const VectorXd sign = (x2.array() >= x1.array()).cast<double>() * 2 - 1;
    return VectorXd(-spec.profit + spec.surcharge.cwiseProduct(sign));
  };
  p.dpreg_dx1 = [spec](const VectorXd& x1, const VectorXd& x2, const VectorXd&) {
    const VectorXd sign = (x2.array() >= x1.array()).cast<double>() * 2 - 1;
    return VectorXd(-spec.surcharge.cwiseProduct(sign));
  };
  validate(p);
  return p;
}

TwoStageProblem facility_recourse_problem(const FacilitySpec& spec) {
  const Index n = spec.fixed.size();
  require(n > 0 && spec.overtime.size() == n && spec.capacity.size() == n, "facility vectors must share a length");
  require((spec.fixed.array() >= 0).all() && (spec.overtime.array() >= 0).all() && (spec.capacity.array() >= 0).all(),
          "facility costs and capacities must be non-negative");
  require(spec.demand_min > 0 && spec.demand_min <= spec.demand_max, "facility needs 0 < demand_min <= demand_max");
  const double U = spec.demand_max;

  // rows: demand, U x_i - sigma_i >= 0, -x_i >= -1
  const auto skeleton = [spec, n, U](double demand) {
    auto milp = make_milp<double>(2 * n, 0, 1 + 2 * n);
    milp.c << spec.fixed, spec.overtime;
    milp.G.row(0) << spec.capacity.transpose(), Eigen::RowVectorXd::Ones(n);
    milp.h(0) = demand;
    for (Index i = 0; i < n; ++i) {
      milp.G(1 + i, i) = U;
      milp.G(1 + i, n + i) = -1;
    }
    add_upper_bounds(milp, 1 + n, 0, n);
    for (Index i = 0; i < n; ++i) milp.int_vars.push_back(i);
    return milp;
  };

  TwoStageProblem p;
  p.name = "facility";
  p.t = 1;
  p.k = 1;
  p.stage1.skeleton = skeleton(0);
  p.stage1.num_params = 1;
  p.stage1.add_vec(Block::h, 0, 0, 1.0);
  p.theta_lo = VectorXd::Constant(1, spec.demand_min);
  p.theta_hi = VectorXd::Constant(1, spec.demand_max);
  p.dx1_blocks = {Block::h};
  p.dx2_blocks = {Block::b};

  p.stage2 = [skeleton, n](const VectorXd& demand) {
    ParamTemplate<double> tm;
    tm.skeleton = skeleton(demand(0));
    tm.skeleton.A = MatrixXd::Zero(n, 2 * n);
    tm.skeleton.A.leftCols(n).setIdentity();
    tm.skeleton.b = VectorXd::Zero(n);
    tm.num_params = 2 * n;
    for (Index i = 0; i < n; ++i) tm.add_vec(Block::b, i, i, 1.0);
    return tm;
  };
  p.penalty = [](const VectorXd&, const VectorXd&, const VectorXd&) { return 0.0; };
  p.dpreg_dx2 = [spec](const VectorXd&, const VectorXd&, const VectorXd&) {
    VectorXd g(2 * spec.fixed.size());
    g << spec.fixed, spec.overtime;
    return g;
  };
  p.dpreg_dx1 = [n](const VectorXd&, const VectorXd&, const VectorXd&) { return VectorXd(VectorXd::Zero(2 * n)); };
  validate(p);
  return p;
}

DimensionReport dimensions(const TwoStageProblem& problem) {
  const auto& sk = problem.stage1.skeleton;
  DimensionReport r;
  r.d = sk.dim();
  r.equalities = sk.num_eq();
  r.inequalities = sk.num_ineq();
  r.constraints = r.equalities + r.inequalities + r.d;
  r.params = problem.t;
  r.outputs = problem.k;
  return r;
}

}  // namespace tspo
