#include "tspo/exact.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <utility>

namespace tspo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kStatusNames[] = {"optimal", "infeasible", "unbounded"};

ExactSolution infeasible_solution() {
  ExactSolution out;
  out.status = SolveStatus::Infeasible;
  out.objective = kInf;
  return out;
}

// Bounds from singleton rows, forcing rows, and fixed variables propagated to
// a fixpoint; what remains is an LP over the free variables shifted to lo.
struct Presolve {
  VectorXd lo, hi;
  std::vector<bool> fixed;
  std::vector<bool> eq_live, ineq_live;
  bool infeasible = false;
};

double row_tol(double rhs) { return 1e-9 * (1.0 + std::abs(rhs)); }

void fix_var(Presolve& ps, Index j, double value) {
  ps.lo(j) = value;
  ps.hi(j) = value;
  ps.fixed[j] = true;
}

// Processes one row a^T x (>= or ==) rhs. Returns true if anything changed.
bool presolve_row(Presolve& ps, const MatrixXd& M, const VectorXd& rhs_full, Index i, bool equality) {
  const Index d = M.cols();
  double rhs = rhs_full(i);
  Index nonzeros = 0, last = -1;
  double minact = 0, maxact = 0;
  for (Index j = 0; j < d; ++j) {
    const double a = M(i, j);
    if (a == 0) continue;
    if (ps.fixed[j]) {
      rhs -= a * ps.lo(j);
      continue;
    }
    ++nonzeros;
    last = j;
    if (a > 0) {
      minact += a * ps.lo(j);
      maxact += a * ps.hi(j);
    } else {
      minact += a * ps.hi(j);
      maxact += a * ps.lo(j);
    }
  }
  auto& live = equality ? ps.eq_live : ps.ineq_live;
  const double tol = row_tol(rhs_full(i));
  if (nonzeros == 0) {
    if (equality ? std::abs(rhs) > tol : rhs > tol) ps.infeasible = true;
    live[i] = false;
    return true;
  }
  if (nonzeros == 1) {
    const double a = M(i, last);
    const double v = rhs / a;
    if (equality) {
      if (v < ps.lo(last) - tol || v > ps.hi(last) + tol) {
        ps.infeasible = true;
      } else {
        fix_var(ps, last, std::min(std::max(v, ps.lo(last)), ps.hi(last)));
      }
    } else if (a > 0) {
      ps.lo(last) = std::max(ps.lo(last), v);
    } else {
      ps.hi(last) = std::min(ps.hi(last), v);
    }
    live[i] = false;
    return true;
  }
  if (maxact < rhs - tol || (equality && minact > rhs + tol)) {
    ps.infeasible = true;
    return true;
  }
  // forcing rows: every variable sits at the bound attaining the extreme activity
  const bool force_max = maxact <= rhs + tol;
  const bool force_min = equality && minact >= rhs - tol;
  if (force_max || force_min) {
    for (Index j = 0; j < d; ++j) {
      const double a = M(i, j);
      if (a == 0 || ps.fixed[j]) continue;
      const bool upper = (a > 0) == force_max;
      fix_var(ps, j, upper ? ps.hi(j) : ps.lo(j));
    }
    live[i] = false;
    return true;
  }
  return false;
}

Presolve presolve(const RelaxedLp<double>& lp, const Bounds& bounds) {
  const Index d = lp.dim();
  Presolve ps;
  ps.lo = bounds.lo.cwiseMax(0.0);
  ps.hi = bounds.hi;
  ps.fixed.assign(d, false);
  ps.eq_live.assign(lp.num_eq(), true);
  ps.ineq_live.assign(lp.num_ineq(), true);
  for (bool changed = true; changed && !ps.infeasible;) {
    changed = false;
    for (Index i = 0; i < lp.num_eq() && !ps.infeasible; ++i)
      if (ps.eq_live[i]) changed |= presolve_row(ps, lp.A, lp.b, i, true);
    for (Index i = 0; i < lp.num_ineq() && !ps.infeasible; ++i)
      if (ps.ineq_live[i]) changed |= presolve_row(ps, lp.G, lp.h, i, false);
    for (Index j = 0; j < d && !ps.infeasible; ++j) {
      if (ps.fixed[j]) continue;
      const double tol = 1e-9 * (1.0 + std::abs(ps.lo(j)));
      if (ps.hi(j) < ps.lo(j) - tol) {
        ps.infeasible = true;
      } else if (ps.hi(j) - ps.lo(j) <= tol) {
        fix_var(ps, j, ps.lo(j));
        changed = true;
      }
    }
  }
  return ps;
}

// Moves a feasible x of {A x = b, G x >= h, x >= 0} to a vertex without
// increasing c^T x. Returns false if an improving ray is found.
bool purify(const RelaxedLp<double>& lp, VectorXd& x) {
  const Index d = lp.dim();
  const Index p = lp.num_eq();
  const Index q = lp.num_ineq();
  const Index m = q + d;
  MatrixXd Gf(m, d);
  VectorXd hf(m);
  if (q > 0) {
    Gf.topRows(q) = lp.G;
    hf.head(q) = lp.h;
  }
  Gf.bottomRows(d) = MatrixXd::Identity(d, d);
  hf.tail(d).setZero();
  const double cnorm = 1.0 + lp.c.cwiseAbs().maxCoeff();

  std::vector<Index> active;
  MatrixXd N;
  VectorXd rhs;
  for (Index iter = 0; iter <= d + 1; ++iter) {
    const VectorXd slack = Gf * x - hf;
    active.clear();
    for (Index i = 0; i < m; ++i)
      if (slack(i) <= 1e-7 * (1.0 + std::abs(hf(i)))) active.push_back(i);
    const Index na = static_cast<Index>(active.size());
    N.resize(p + na, d);
    rhs.resize(p + na);
    if (p > 0) {
      N.topRows(p) = lp.A;
      rhs.head(p) = lp.b;
    }
    for (Index k = 0; k < na; ++k) {
      N.row(p + k) = Gf.row(active[k]);
      rhs(p + k) = hf(active[k]);
    }
    MatrixXd Z = MatrixXd::Identity(d, d);
    if (p + na > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qr(N.transpose());
      qr.setThreshold(1e-9);
      const Index rank = qr.rank();
      if (rank >= d) break;
      const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(d, d);
      Z = Q.rightCols(d - rank);
    }
    VectorXd dir = -(Z * (Z.transpose() * lp.c));
    if (dir.norm() <= 1e-12 * cnorm) {
      dir = Z.col(0);
      if (lp.c.dot(dir) > 0) dir = -dir;
    }

    const auto ratio = [&](const VectorXd& v) {
      double t = kInf;
      const VectorXd rate = Gf * v;
      for (Index i = 0; i < m; ++i) {
        if (rate(i) < -1e-12 * v.norm()) t = std::min(t, std::max(0.0, slack(i)) / -rate(i));
      }
      return t;
    };
    double t = ratio(dir);
    if (!std::isfinite(t)) {
      if (lp.c.dot(dir) < -1e-12 * cnorm * dir.norm()) return false;
      dir = -dir;
      t = ratio(dir);
      if (!std::isfinite(t)) break;
    }
    x += t * dir;
  }

  // snap onto the active system to remove drift
  if (N.rows() > 0) {
    const VectorXd corrected = x + N.completeOrthogonalDecomposition().solve(rhs - N * x);
    const VectorXd slack = Gf * corrected - hf;
    if (slack.minCoeff() >= -1e-7) x = corrected;
  }
  for (Index j = 0; j < d; ++j) x(j) = std::max(0.0, x(j));
  return true;
}

// The free-variable LP in shifted coordinates x' = x_F - lo_F.
struct Reduced {
  RelaxedLp<double> lp;
  std::vector<Index> free_vars;
  VectorXd base;  // full-length point holding fixed values and lo for free ones
};

Reduced reduce(const RelaxedLp<double>& lp, const Presolve& ps) {
  const Index d = lp.dim();
  Reduced out;
  out.base = ps.lo;
  for (Index j = 0; j < d; ++j)
    if (!ps.fixed[j]) out.free_vars.push_back(j);
  const Index f = static_cast<Index>(out.free_vars.size());

  std::vector<Index> eq_rows, ineq_rows, upper;
  for (Index i = 0; i < lp.num_eq(); ++i)
    if (ps.eq_live[i]) eq_rows.push_back(i);
  for (Index i = 0; i < lp.num_ineq(); ++i)
    if (ps.ineq_live[i]) ineq_rows.push_back(i);
  for (Index k = 0; k < f; ++k)
    if (std::isfinite(ps.hi(out.free_vars[k]))) upper.push_back(k);

  auto& r = out.lp;
  r.c.resize(f);
  for (Index k = 0; k < f; ++k) r.c(k) = lp.c(out.free_vars[k]);
  const Index pe = static_cast<Index>(eq_rows.size());
  r.A.resize(pe, f);
  r.b.resize(pe);
  for (Index i = 0; i < pe; ++i) {
    r.b(i) = lp.b(eq_rows[i]) - lp.A.row(eq_rows[i]).dot(out.base);
    for (Index k = 0; k < f; ++k) r.A(i, k) = lp.A(eq_rows[i], out.free_vars[k]);
  }
  const Index qi = static_cast<Index>(ineq_rows.size());
  const Index qu = static_cast<Index>(upper.size());
  r.G = MatrixXd::Zero(qi + qu, f);
  r.h.resize(qi + qu);
  for (Index i = 0; i < qi; ++i) {
    r.h(i) = lp.h(ineq_rows[i]) - lp.G.row(ineq_rows[i]).dot(out.base);
    for (Index k = 0; k < f; ++k) r.G(i, k) = lp.G(ineq_rows[i], out.free_vars[k]);
  }
  for (Index u = 0; u < qu; ++u) {
    const Index j = out.free_vars[upper[u]];
    r.G(qi + u, upper[u]) = -1.0;
    r.h(qi + u) = -(ps.hi(j) - ps.lo(j));
  }
  return out;
}

}  // namespace

const char* status_name(SolveStatus status) { return kStatusNames[static_cast<int>(status)]; }

Bounds Bounds::nonnegative(Index d) { return Bounds{VectorXd::Zero(d), VectorXd::Constant(d, kInf)}; }

ExactSolution solve_lp_exact(const RelaxedLp<double>& lp) { return solve_lp_exact(lp, Bounds::nonnegative(lp.dim())); }

ExactSolution solve_lp_exact(const RelaxedLp<double>& lp, const Bounds& bounds) {
  detail::validate_lp(lp);
  const Index d = lp.dim();
  if (bounds.lo.size() != d || bounds.hi.size() != d) throw DimensionMismatch("bounds length differs from LP dimension");

  const Presolve ps = presolve(lp, bounds);
  if (ps.infeasible) return infeasible_solution();
  const Reduced red = reduce(lp, ps);

  VectorXd x = red.base;
  if (!red.free_vars.empty()) {
    VectorXd xr;
    try {
      xr = solve_barrier(red.lp, 1e-9).x;
    } catch (const Infeasible&) {
      return infeasible_solution();
    } catch (const Unbounded&) {
      ExactSolution out;
      out.status = SolveStatus::Unbounded;
      out.objective = -kInf;
      return out;
    }
    if (!purify(red.lp, xr)) {
      ExactSolution out;
      out.status = SolveStatus::Unbounded;
      out.objective = -kInf;
      return out;
    }
    for (std::size_t k = 0; k < red.free_vars.size(); ++k) x(red.free_vars[k]) += xr(static_cast<Index>(k));
  } else {
    // everything fixed by presolve; the dropped rows were checked on the way
    if (lp.num_eq() > 0 && (lp.A * x - lp.b).cwiseAbs().maxCoeff() > 1e-7 * (1.0 + lp.b.cwiseAbs().maxCoeff())) {
      return infeasible_solution();
    }
    if (lp.num_ineq() > 0 && (lp.G * x - lp.h).minCoeff() < -1e-7 * (1.0 + lp.h.cwiseAbs().maxCoeff())) {
      return infeasible_solution();
    }
  }
  ExactSolution out;
  out.x = x;
  out.objective = lp.c.dot(x);
  out.status = SolveStatus::Optimal;
  return out;
}

namespace {

struct QueuedNode {
  double bound;
  std::int64_t id;
  Bounds bounds;
};

struct NodeOrder {
  bool operator()(const QueuedNode& a, const QueuedNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

bool lex_less(const VectorXd& a, const VectorXd& b) {
  for (Index j = 0; j < a.size(); ++j) {
    if (a(j) < b(j)) return true;
    if (a(j) > b(j)) return false;
  }
  return false;
}

}  // namespace

ExactSolution solve_milp_bnb(const StandardFormMilp<double>& milp, const BnbOptions& options) {
  validate(milp);
  const RelaxedLp<double> lp = relax(milp);
  const Index d = lp.dim();

  ExactSolution best = infeasible_solution();
  std::priority_queue<QueuedNode, std::vector<QueuedNode>, NodeOrder> open;
  std::int64_t next_id = 0;
  open.push({-kInf, next_id++, Bounds::nonnegative(d)});
  const auto gap = [&best] { return 1e-9 * (1.0 + std::abs(best.objective)); };

  std::int64_t nodes = 0;
  while (!open.empty()) {
    QueuedNode node = open.top();
    open.pop();
    if (best.status == SolveStatus::Optimal && node.bound > best.objective - gap()) continue;
    if (++nodes > options.node_limit) throw NodeLimitExceeded("branch and bound exceeded the node limit");

    // TODO: warm-start node LPs from the parent solution; rosters past ~50 variables spend seconds per instance here.
    const ExactSolution relaxed = solve_lp_exact(lp, node.bounds);
    if (relaxed.status == SolveStatus::Unbounded) {
      best.status = SolveStatus::Unbounded;
      best.objective = -kInf;
      best.x.resize(0);
      best.node_count = nodes;
      return best;
    }
    BnbNode entry{node.id, relaxed.objective, best.objective, false};
    if (relaxed.status == SolveStatus::Infeasible) {
      if (options.log) options.log->push_back(entry);
      continue;
    }

    if (best.status == SolveStatus::Optimal && relaxed.objective > best.objective + gap()) {
      if (options.log) options.log->push_back(entry);
      continue;
    }

    Index branch = -1;
    double worst = options.int_tol;
    for (Index j : milp.int_vars) {
      const double frac = std::abs(relaxed.x(j) - std::round(relaxed.x(j)));
      if (frac > worst) {
        worst = frac;
        branch = j;
      }
    }
    if (branch < 0) {
      VectorXd x = relaxed.x;
      for (Index j : milp.int_vars) x(j) = std::round(x(j));
      const double obj = lp.c.dot(x);
      const bool better = best.status != SolveStatus::Optimal || obj < best.objective - gap() ||
                          (obj <= best.objective + gap() && lex_less(x, best.x));
      if (better) {
        best.x = x;
        best.objective = obj;
        best.status = SolveStatus::Optimal;
      }
      entry.integral = true;
      entry.incumbent = best.objective;
      if (options.log) options.log->push_back(entry);
      continue;
    }
    if (options.log) options.log->push_back(entry);
    if (best.status == SolveStatus::Optimal && relaxed.objective > best.objective - gap()) continue;

    const double v = relaxed.x(branch);
    Bounds down = node.bounds;
    down.hi(branch) = std::floor(v);
    Bounds up = std::move(node.bounds);
    up.lo(branch) = std::ceil(v);
    open.push({relaxed.objective, next_id++, std::move(down)});
    open.push({relaxed.objective, next_id++, std::move(up)});
  }
  best.node_count = nodes;
  return best;
}

ExactSolution enumerate_binary(const StandardFormMilp<double>& milp) {
  validate(milp);
  const Index d = milp.dim();
  if (d > 20) throw TooLarge("enumerate_binary supports at most 20 variables");
  const Index p = milp.num_eq();
  const Index q = milp.num_ineq();

  ExactSolution best = infeasible_solution();
  VectorXd x(d), ax(p), gx(q);
  const std::int64_t count = std::int64_t{1} << d;
  for (std::int64_t mask = 0; mask < count; ++mask) {
    // x_0 is the most significant bit, so masks run in lexicographic order of x
    for (Index j = 0; j < d; ++j) x(j) = static_cast<double>((mask >> (d - 1 - j)) & 1);
    const double obj = milp.c.dot(x);
    if (best.status == SolveStatus::Optimal && !(obj < best.objective)) continue;
    bool ok = true;
    if (p > 0) {
      ax.noalias() = milp.A * x;
      for (Index i = 0; i < p && ok; ++i) ok = std::abs(ax(i) - milp.b(i)) <= row_tol(milp.b(i));
    }
    if (ok && q > 0) {
      gx.noalias() = milp.G * x;
      for (Index i = 0; i < q && ok; ++i) ok = gx(i) - milp.h(i) >= -row_tol(milp.h(i));
    }
    if (!ok) continue;
    best.x = x;
    best.objective = obj;
    best.status = SolveStatus::Optimal;
  }
  best.node_count = count;
  return best;
}

bool is_binary(const StandardFormMilp<double>& milp) {
  const Index d = milp.dim();
  std::vector<bool> integer(static_cast<std::size_t>(d), false), capped(static_cast<std::size_t>(d), false);
  for (Index j : milp.int_vars) integer[static_cast<std::size_t>(j)] = true;
  for (Index i = 0; i < milp.num_ineq(); ++i) {
    Index col = -1, nonzeros = 0;
    for (Index j = 0; j < d; ++j) {
      if (milp.G(i, j) != 0) {
        ++nonzeros;
        col = j;
      }
    }
    if (nonzeros == 1 && milp.G(i, col) == -1 && -milp.h(i) < 2) capped[static_cast<std::size_t>(col)] = true;
  }
  for (Index j = 0; j < d; ++j) {
    if (!integer[static_cast<std::size_t>(j)] || !capped[static_cast<std::size_t>(j)]) return false;
  }
  return true;
}

ExactSolution solve_milp_exact(const StandardFormMilp<double>& milp, Index max_enumerate) {
  if (milp.dim() <= std::min<Index>(max_enumerate, 20) && is_binary(milp)) return enumerate_binary(milp);
  return solve_milp_bnb(milp);
}

}  // namespace tspo
