#include "tspo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tspo/errors.hpp"
#include "tspo/log.hpp"
#include "tspo/problems.hpp"

namespace tspo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

const std::vector<std::string> kProblems{"alloy", "knapsack", "nsp", "stocking", "facility"};
const std::vector<std::string> kMethods{"2s", "nn", "ridge", "knn"};

bool contains(const std::vector<std::string>& xs, const std::string& x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : ", ") + x;
  return out;
}

// Collects every schema issue while walking the document.
class Checker {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const std::string& field, const std::string& message) { issues.push_back({field, message}); }

  void keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (!contains(allowed, key)) fail(join_path(path, key), "unknown field");
    }
  }

  // Absent is fine. Bounds are inclusive except lo when open_lo is set.
  void number(const json& obj, const std::string& path, const std::string& key, double lo, double hi,
              bool open_lo = false) {
    if (!obj.contains(key)) return;
    const auto& v = obj[key];
    const std::string f = join_path(path, key);
    if (!v.is_number()) return fail(f, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo)) {
      fail(f, "out of range " + range(lo, hi, open_lo));
    }
  }

  void integer(const json& obj, const std::string& path, const std::string& key, long long lo, long long hi) {
    if (!obj.contains(key)) return;
    const auto& v = obj[key];
    const std::string f = join_path(path, key);
    if (!v.is_number_integer()) return fail(f, "expected an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi) fail(f, "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  void vector(const json& obj, const std::string& path, const std::string& key, double lo, bool open_lo,
              bool required) {
    const std::string f = join_path(path, key);
    if (!obj.contains(key)) {
      if (required) fail(f, "required");
      return;
    }
    const auto& v = obj[key];
    if (!v.is_array() || v.empty()) return fail(f, "expected a nonempty array of numbers");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string fi = f + "[" + std::to_string(i) + "]";
      if (!v[i].is_number()) {
        fail(fi, "expected a number");
        continue;
      }
      const double x = v[i].get<double>();
      if (!std::isfinite(x) || x < lo || (open_lo && x == lo)) fail(fi, "out of range " + range(lo, INFINITY, open_lo));
    }
  }

  static std::string join_path(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  static std::string range(double lo, double hi, bool open_lo) {
    std::ostringstream os;
    os << (open_lo ? "(" : "[") << lo << ", " << hi << (std::isinf(hi) ? ")" : "]");
    return os.str();
  }
};

void check_same_length(Checker& c, const json& spec, const std::vector<std::string>& keys) {
  std::size_t n = 0;
  for (const auto& key : keys) {
    if (!spec.contains(key) || !spec[key].is_array()) return;
    if (n == 0) n = spec[key].size();
    if (spec[key].size() != n) c.fail("spec." + key, "length differs from spec." + keys.front());
  }
}

void check_spec(Checker& c, const std::string& problem, const json& spec) {
  const std::string p = "spec";
  if (problem == "alloy") {
    c.keys(spec, p, {"preset", "cost", "req", "con_min", "con_max"});
    const bool preset = spec.contains("preset");
    if (preset && !(spec["preset"].is_string() && (spec["preset"] == "brass" || spec["preset"] == "titanium"))) {
      c.fail("spec.preset", "expected \"brass\" or \"titanium\"");
    }
    c.vector(spec, p, "cost", 0, true, !preset);
    c.vector(spec, p, "req", 0, false, !preset);
    c.number(spec, p, "con_min", 0, 1e300, true);
    c.number(spec, p, "con_max", 0, 1e300, true);
  } else if (problem == "knapsack") {
    c.keys(spec, p, {"d", "cap", "size_min"});
    c.integer(spec, p, "d", 1, 20);
    c.number(spec, p, "cap", 0, 1e300, true);
    c.number(spec, p, "size_min", 0, 1e300, true);
  } else if (problem == "nsp") {
    c.keys(spec, p, {"nurses", "days", "shifts", "m", "h_max", "pref_seed"});
    for (const char* key : {"nurses", "days", "shifts"}) c.integer(spec, p, key, 1, 1000);
    c.number(spec, p, "m", 0, 1e300, true);
    c.number(spec, p, "h_max", 0, 1e300, true);
    c.integer(spec, p, "pref_seed", 0, std::numeric_limits<long long>::max());
  } else if (problem == "stocking") {
    c.keys(spec, p, {"profit", "size", "surcharge"});
    c.vector(spec, p, "profit", -1e300, false, true);
    c.vector(spec, p, "size", 0, true, true);
    c.vector(spec, p, "surcharge", 0, false, true);
    check_same_length(c, spec, {"profit", "size", "surcharge"});
  } else if (problem == "facility") {
    c.keys(spec, p, {"fixed", "overtime", "capacity", "demand_min", "demand_max"});
    c.vector(spec, p, "fixed", 0, false, true);
    c.vector(spec, p, "overtime", 0, false, true);
    c.vector(spec, p, "capacity", 0, false, true);
    check_same_length(c, spec, {"fixed", "overtime", "capacity"});
    c.number(spec, p, "demand_min", 0, 1e300);
    c.number(spec, p, "demand_max", 0, 1e300, true);
  }
}

VectorXd to_vector(const json& v) {
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i].get<double>();
  return out;
}

template <class T>
T value_or(const json& obj, const std::string& key, T fallback) {
  return obj.contains(key) ? obj[key].get<T>() : fallback;
}

// Per-entry draws from factor +/- 0.015, floored at zero.
VectorXd jittered(Index n, double factor, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x6a6974ULL);
  std::uniform_real_distribution<double> u(-0.015, 0.015);
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = std::max(0.0, factor + u(rng));
  return out;
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// Pools every parameter row of every instance: rows of [features, 1] (or
// plain features) against the per-output targets.
struct PooledRows {
  MatrixXd X;
  MatrixXd Y;  // rows x k
};

PooledRows pool(const Dataset& data, bool intercept) {
  if (data.size() == 0) throw EmptyTrainSet("baseline needs training instances");
  const Index rows = static_cast<Index>(data.size()) * data.t;
  PooledRows out{MatrixXd(rows, data.m + (intercept ? 1 : 0)), MatrixXd(rows, data.k)};
  Index r = 0;
  for (const auto& inst : data.instances) {
    for (Index j = 0; j < data.t; ++j, ++r) {
      out.X.row(r).head(data.m) = inst.features.row(j);
      if (intercept) out.X(r, data.m) = 1;
      for (Index o = 0; o < data.k; ++o) out.Y(r, o) = inst.theta(o * data.t + j);
    }
  }
  return out;
}

ExperimentConfig build_config(const json& j);

}  // namespace

std::vector<ConfigIssue> validate_config(const json& j) {
  Checker c;
  if (!j.is_object()) {
    c.fail("", "expected a JSON object");
    return c.issues;
  }
  c.keys(j, "", {"problem", "spec", "data", "methods", "penalty_factors", "runs", "seed", "train", "out", "jobs"});

  std::string problem;
  if (!j.contains("problem")) {
    c.fail("problem", "required");
  } else if (!j["problem"].is_string() || !contains(kProblems, j["problem"].get<std::string>())) {
    c.fail("problem", "expected one of " + join(kProblems));
  } else {
    problem = j["problem"].get<std::string>();
  }

  if (j.contains("spec") && !j["spec"].is_object()) {
    c.fail("spec", "expected an object");
  } else if (!problem.empty()) {
    check_spec(c, problem, j.value("spec", json::object()));
  }

  if (j.contains("data")) {
    const auto& d = j["data"];
    if (!d.is_object()) {
      c.fail("data", "expected an object");
    } else {
      c.keys(d, "data", {"source", "path", "n", "m", "mapping", "noise_std"});
      const std::string source = d.value("source", std::string("synthetic"));
      if (source != "synthetic" && source != "csv") c.fail("data.source", "expected \"synthetic\" or \"csv\"");
      if (source == "csv" && !(d.contains("path") && d["path"].is_string())) c.fail("data.path", "required for csv");
      c.integer(d, "data", "n", 2, 10'000'000);
      c.integer(d, "data", "m", 1, 1'000'000);
      if (d.contains("mapping")) {
        const auto& g = d["mapping"];
        if (!g.is_string() || (g != "linear" && g != "relu_bump" && g != "sine_mix")) {
          c.fail("data.mapping", "expected linear, relu_bump or sine_mix");
        }
      }
      c.number(d, "data", "noise_std", 0, 1e300);
    }
  }

  if (!j.contains("methods")) {
    c.fail("methods", "required");
  } else if (!j["methods"].is_array() || j["methods"].empty()) {
    c.fail("methods", "expected a nonempty array");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j["methods"].size(); ++i) {
      const auto& m = j["methods"][i];
      const std::string f = "methods[" + std::to_string(i) + "]";
      if (!m.is_string() || !contains(kMethods, m.get<std::string>())) {
        c.fail(f, "unknown method, expected one of " + join(kMethods));
      } else if (!seen.insert(m.get<std::string>()).second) {
        c.fail(f, "duplicate method");
      }
    }
  }

  if (!j.contains("penalty_factors")) {
    c.fail("penalty_factors", "required");
  } else {
    c.vector(j, "", "penalty_factors", 0, false, true);
  }
  c.integer(j, "", "runs", 1, 100000);
  c.integer(j, "", "seed", 0, std::numeric_limits<long long>::max());
  c.integer(j, "", "jobs", 1, 1024);
  if (j.contains("out") && !j["out"].is_string()) c.fail("out", "expected a string");

  if (j.contains("train")) {
    const auto& t = j["train"];
    if (!t.is_object()) {
      c.fail("train", "expected an object");
    } else {
      c.keys(t, "train",
             {"lr", "epochs", "pretrain_epochs", "pretrain_lr", "mse_epochs", "mu_cutoff", "hidden", "weight_decay",
              "val_fraction", "train_fraction", "ridge_lambda", "knn_k"});
      c.number(t, "train", "lr", 0, 1e300, true);
      c.number(t, "train", "pretrain_lr", 0, 1e300, true);
      c.number(t, "train", "mu_cutoff", 0, 1e300, true);
      c.number(t, "train", "weight_decay", 0, 1e300);
      c.number(t, "train", "ridge_lambda", 0, 1e300);
      c.number(t, "train", "val_fraction", 0, 0.9);
      c.number(t, "train", "train_fraction", 0, 1, true);
      c.integer(t, "train", "epochs", 0, 1'000'000);
      c.integer(t, "train", "pretrain_epochs", 0, 1'000'000);
      c.integer(t, "train", "mse_epochs", 0, 1'000'000);
      c.integer(t, "train", "knn_k", 1, 1'000'000);
      if (t.contains("hidden")) {
        const auto& h = t["hidden"];
        bool ok = h.is_array();
        if (ok)
          for (const auto& x : h) ok = ok && x.is_number_integer() && x.get<long long>() >= 1;
        if (!ok) c.fail("train.hidden", "expected an array of positive integers");
      }
    }
  }

  // Constructing the problem catches specs that parse but describe an
  // impossible instance.
  if (c.issues.empty()) {
    try {
      const auto config = build_config(j);
      validate(make_problem(config, config.penalty_factors.front(), config.seed));
    } catch (const ConfigError& e) {
      c.fail(e.field(), e.what());
    } catch (const Error& e) {
      c.fail("spec", e.what());
    }
  }
  return c.issues;
}

namespace {

ExperimentConfig build_config(const json& j) {
  ExperimentConfig c;
  c.problem = j["problem"].get<std::string>();
  c.spec = j.value("spec", json::object());
  if (j.contains("data")) {
    const auto& d = j["data"];
    c.data.source = value_or<std::string>(d, "source", c.data.source);
    c.data.path = value_or<std::string>(d, "path", c.data.path);
    c.data.n = value_or<Index>(d, "n", c.data.n);
    c.data.m = value_or<Index>(d, "m", c.data.m);
    if (d.contains("mapping")) c.data.mapping = mapping_from_name(d["mapping"].get<std::string>());
    c.data.noise_std = value_or<double>(d, "noise_std", c.data.noise_std);
  }
  c.methods = j["methods"].get<std::vector<std::string>>();
  c.penalty_factors = j["penalty_factors"].get<std::vector<double>>();
  c.runs = value_or<int>(j, "runs", c.runs);
  c.seed = value_or<std::uint64_t>(j, "seed", c.seed);
  c.out = value_or<std::string>(j, "out", c.out);
  c.jobs = value_or<int>(j, "jobs", c.jobs);
  if (j.contains("train")) {
    const auto& t = j["train"];
    auto& tc = c.method.train;
    tc.lr = value_or<double>(t, "lr", tc.lr);
    tc.epochs = value_or<int>(t, "epochs", tc.epochs);
    tc.pretrain_epochs = value_or<int>(t, "pretrain_epochs", tc.pretrain_epochs);
    tc.pretrain_lr = value_or<double>(t, "pretrain_lr", tc.pretrain_lr);
    tc.mu_cutoff = value_or<double>(t, "mu_cutoff", tc.mu_cutoff);
    tc.weight_decay = value_or<double>(t, "weight_decay", tc.weight_decay);
    tc.val_fraction = value_or<double>(t, "val_fraction", tc.val_fraction);
    if (t.contains("hidden")) tc.hidden = t["hidden"].get<std::vector<Index>>();
    c.method.mse_epochs = value_or<int>(t, "mse_epochs", c.method.mse_epochs);
    c.method.ridge_lambda = value_or<double>(t, "ridge_lambda", c.method.ridge_lambda);
    c.method.knn_k = value_or<Index>(t, "knn_k", c.method.knn_k);
    c.method.train_fraction = value_or<double>(t, "train_fraction", c.method.train_fraction);
  }
  return c;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  const auto issues = validate_config(j);
  if (!issues.empty()) throw ConfigError(issues.front().field, issues.front().message);
  return build_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

TwoStageProblem make_problem(const ExperimentConfig& config, double factor, std::uint64_t seed) {
  const json& s = config.spec;
  if (config.problem == "alloy") {
    AlloySpec spec;
    if (s.contains("preset")) spec = s["preset"] == "brass" ? brass_preset() : titanium_preset();
    if (s.contains("cost")) spec.cost = to_vector(s["cost"]);
    if (s.contains("req")) spec.req = to_vector(s["req"]);
    spec.con_min = value_or<double>(s, "con_min", spec.con_min);
    spec.con_max = value_or<double>(s, "con_max", spec.con_max);
    spec.sigma = jittered(spec.cost.size(), factor, seed);
    return alloy_problem(spec);
  }
  if (config.problem == "knapsack") {
    KnapsackSpec spec;
    spec.d = value_or<Index>(s, "d", spec.d);
    spec.cap = value_or<double>(s, "cap", spec.cap);
    spec.size_min = value_or<double>(s, "size_min", spec.size_min);
    spec.sigma = factor;
    return knapsack_problem(spec);
  }
  if (config.problem == "nsp") {
    auto spec = nsp_random_spec(value_or<Index>(s, "nurses", 15), value_or<Index>(s, "days", 7),
                                value_or<Index>(s, "shifts", 3), value_or<double>(s, "m", 3), factor,
                                value_or<double>(s, "h_max", 10), value_or<std::uint64_t>(s, "pref_seed", 0));
    spec.gamma = jittered(spec.P.size(), factor, seed);
    return nsp_problem(spec);
  }
  if (config.problem == "stocking") {
    StockingSpec spec{to_vector(s["profit"]), to_vector(s["size"]), to_vector(s["surcharge"])};
    spec.surcharge *= factor;
    return product_stocking_problem(spec);
  }
  if (config.problem == "facility") {
    FacilitySpec spec{to_vector(s["fixed"]), to_vector(s["overtime"]), to_vector(s["capacity"])};
    spec.demand_min = value_or<double>(s, "demand_min", spec.demand_min);
    spec.demand_max = value_or<double>(s, "demand_max", spec.demand_max);
    return facility_recourse_problem(spec);
  }
  throw ConfigError("problem", "unknown problem '" + config.problem + "'");
}

SynthSpec synth_spec(const ExperimentConfig& config, const TwoStageProblem& problem) {
  SynthSpec spec;
  spec.t = problem.t;
  spec.m = config.data.m;
  spec.n = config.data.n;
  spec.mapping = config.data.mapping;
  spec.noise_std = config.data.noise_std;
  const double lo = problem.theta_lo.minCoeff(), hi = problem.theta_hi.maxCoeff();
  if (config.problem == "knapsack") {
    spec.outputs = {OutputSpec{4, 10, 0.5, INFINITY, false}, OutputSpec{8, 25, 1, INFINITY, false}};
  } else if (config.problem == "nsp") {
    spec.outputs = {OutputSpec{hi / 4, hi / 2, 0, hi, true}};
  } else if (config.problem == "alloy") {
    spec.outputs = {OutputSpec{0.2, 0.5, lo, hi, false}};
  } else {
    // stocking and facility: one scalar spread around the middle of its range
    spec.outputs = {OutputSpec{(hi - lo) / 5, (hi + lo) / 2, lo, hi, false}};
  }
  return spec;
}

Predictor make_ridge_predictor(const Dataset& train, double lambda) {
  const auto rows = pool(train, true);
  MatrixXd W(rows.X.cols(), train.k);
  for (Index o = 0; o < train.k; ++o) W.col(o) = ridge_fit(rows.X, rows.Y.col(o), lambda);
  const Index t = train.t, m = train.m, k = train.k;
  return [W, t, m, k](const MatrixXd& features) {
    if (features.rows() != t || features.cols() != m) throw DimensionMismatch("ridge predictor: feature shape");
    VectorXd out(t * k);
    VectorXd x(m + 1);
    for (Index j = 0; j < t; ++j) {
      x.head(m) = features.row(j).transpose();
      x(m) = 1;
      for (Index o = 0; o < k; ++o) out(o * t + j) = ridge_predict(W.col(o), x);
    }
    return out;
  };
}

Predictor make_knn_predictor(const Dataset& train, Index k_neighbors) {
  const auto rows = pool(train, false);
  const Index t = train.t, m = train.m, k = train.k;
  if (k_neighbors > rows.X.rows()) throw DimensionMismatch("knn predictor: k exceeds the pooled training rows");
  return [rows, t, m, k, k_neighbors](const MatrixXd& features) {
    if (features.rows() != t || features.cols() != m) throw DimensionMismatch("knn predictor: feature shape");
    VectorXd out(t * k);
    for (Index j = 0; j < t; ++j) {
      const VectorXd q = features.row(j).transpose();
      for (Index o = 0; o < k; ++o) out(o * t + j) = knn_predict(rows.X, rows.Y.col(o), k_neighbors, q);
    }
    return out;
  };
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const std::size_t F = config.penalty_factors.size(), M = config.methods.size(),
                    R = static_cast<std::size_t>(config.runs);
  std::vector<DetailRow> detail(F * M * R);

  std::optional<Dataset> csv;
  if (config.data.source == "csv") csv = load_csv(config.data.path);

  for (std::size_t r = 0; r < R; ++r) {
    const std::uint64_t run_seed = config.seed + r;
    const auto shape = make_problem(config, config.penalty_factors.front(), run_seed);
    Dataset all = csv ? *csv : generate(synth_spec(config, shape), run_seed);
    if (all.t * all.k != shape.num_params()) {
      throw ConfigError("data", "dataset has " + std::to_string(all.t * all.k) + " parameters per instance, problem needs " +
                                    std::to_string(shape.num_params()));
    }
    auto [train_set, test_set] = split(all, config.method.train_fraction, run_seed);
    log_info("run " + std::to_string(r) + ": " + std::to_string(train_set.size()) + " train, " +
             std::to_string(test_set.size()) + " test");

    TrainConfig tc = config.method.train;
    tc.seed = run_seed;
    tc.jobs = config.jobs;

    // Penalty-independent baselines are fit once per run.
    std::map<std::string, Predictor> fixed;
    for (const auto& method : config.methods) {
      if (method == "nn") {
        TrainConfig nc = tc;
        nc.pretrain_epochs = config.method.mse_epochs;
        fixed[method] = mlp_predictor(train_mse(train_set, nc).net);
      } else if (method == "ridge") {
        fixed[method] = make_ridge_predictor(train_set, config.method.ridge_lambda);
      } else if (method == "knn") {
        fixed[method] = make_knn_predictor(train_set, config.method.knn_k);
      }
    }

    for (std::size_t f = 0; f < F; ++f) {
      const double factor = config.penalty_factors[f];
      const auto problem = make_problem(config, factor, run_seed);
      for (std::size_t mi = 0; mi < M; ++mi) {
        const auto& method = config.methods[mi];
        Predictor model = method == "2s" ? mlp_predictor(train(problem, train_set, tc).net) : fixed.at(method);
        auto& row = detail[(f * M + mi) * R + r];
        row.problem = config.problem;
        row.method = method;
        row.penalty_factor = factor;
        row.run_seed = run_seed;
        row.eval = evaluate(problem, model, test_set, config.jobs);
        row.eval.reports.clear();
        log_info(method + " factor " + fmt(factor) + " run " + std::to_string(r) + ": mean preg " +
                 fmt(row.eval.mean_preg));
      }
    }
  }
  ExperimentResult out;
  out.summary = summarize(detail);
  out.detail = std::move(detail);
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<DetailRow>& detail) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> pregs;
  for (const auto& d : detail) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.problem == d.problem && s.method == d.method && s.penalty_factor == d.penalty_factor;
    });
    if (it == out.end()) {
      out.push_back({d.problem, d.method, d.penalty_factor});
      pregs.emplace_back();
      it = out.end() - 1;
    }
    auto& s = *it;
    ++s.runs;
    s.mean_preg += d.eval.mean_preg;
    s.mean_tov += d.eval.mean_tov;
    s.feasibility_fraction += d.eval.feasibility_fraction;
    pregs[static_cast<std::size_t>(it - out.begin())].push_back(d.eval.mean_preg);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    const double n = s.runs;
    s.mean_preg /= n;
    s.mean_tov /= n;
    s.feasibility_fraction /= n;
    s.std_preg = sample_std(pregs[i]);
  }
  return out;
}

std::string detail_csv(const std::vector<DetailRow>& rows) {
  std::string out = "problem,method,penalty_factor,run_seed,mean_preg,std_preg,mean_tov,feasibility_fraction\n";
  for (const auto& r : rows) {
    out += r.problem + "," + r.method + "," + fmt(r.penalty_factor) + "," + std::to_string(r.run_seed) + "," +
           fmt(r.eval.mean_preg) + "," + fmt(r.eval.std_preg) + "," + fmt(r.eval.mean_tov) + "," +
           fmt(r.eval.feasibility_fraction) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "problem,method,penalty_factor,runs,mean_preg,std_preg,mean_tov,feasibility_fraction\n";
  for (const auto& r : rows) {
    out += r.problem + "," + r.method + "," + fmt(r.penalty_factor) + "," + std::to_string(r.runs) + "," +
           fmt(r.mean_preg) + "," + fmt(r.std_preg) + "," + fmt(r.mean_tov) + "," + fmt(r.feasibility_fraction) +
           "\n";
  }
  return out;
}

void write_results(const ExperimentResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
  };
  write("detail.csv", detail_csv(result.detail));
  write("summary.csv", summary_csv(result.summary));
}

}  // namespace tspo
