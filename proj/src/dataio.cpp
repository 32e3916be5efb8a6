#include "tspo/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace tspo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_dataset(const Dataset& data) {
  if (data.t < 1 || data.m < 1 || data.k < 1) throw SchemaError("t, m and k must be positive");
  for (std::size_t i = 0; i < data.instances.size(); ++i) {
    const auto& inst = data.instances[i];
    if (inst.features.rows() != data.t || inst.features.cols() != data.m || inst.theta.size() != data.t * data.k) {
      throw SchemaError("instance " + std::to_string(i) + " does not match the dataset shape");
    }
    if (!inst.features.allFinite() || !inst.theta.allFinite()) {
      throw SchemaError("instance " + std::to_string(i) + " has non-finite values");
    }
  }
}

double apply_mapping(Mapping g, double z) {
  switch (g) {
    case Mapping::Linear:
      return z;
    case Mapping::ReluBump:
      return std::max(0.0, z) + std::max(0.0, 1.0 - std::abs(z));
    case Mapping::SineMix:
      return std::sin(2 * z) + 0.5 * z;
  }
  return z;
}

Mapping mapping_from_name(const std::string& name) {
  if (name == "linear") return Mapping::Linear;
  if (name == "relu_bump") return Mapping::ReluBump;
  if (name == "sine_mix") return Mapping::SineMix;
  throw ConfigError("mapping", "unknown mapping '" + name + "'");
}

std::string mapping_name(Mapping g) {
  switch (g) {
    case Mapping::Linear:
      return "linear";
    case Mapping::ReluBump:
      return "relu_bump";
    case Mapping::SineMix:
      return "sine_mix";
  }
  return "linear";
}

Dataset generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n < 1 || spec.t < 1 || spec.m < 1 || spec.outputs.empty()) {
    throw DimensionMismatch("synthetic spec needs n, t, m and at least one output");
  }
  const Index k = static_cast<Index>(spec.outputs.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0, 1);

  Dataset data;
  data.t = spec.t;
  data.m = spec.m;
  data.k = k;
  data.provenance = "synthetic:" + mapping_name(spec.mapping) + ":seed=" + std::to_string(seed);
  MatrixXd w(k, spec.m);
  for (Index o = 0; o < k; ++o)
    for (Index j = 0; j < spec.m; ++j) w(o, j) = normal(rng);
  data.truth = w;

  const double norm = 1.0 / std::sqrt(static_cast<double>(spec.m));
  data.instances.reserve(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    Instance inst{MatrixXd(spec.t, spec.m), VectorXd(spec.t * k)};
    for (Index r = 0; r < spec.t; ++r)
      for (Index j = 0; j < spec.m; ++j) inst.features(r, j) = normal(rng);
    for (Index o = 0; o < k; ++o) {
      const auto& out = spec.outputs[static_cast<std::size_t>(o)];
      for (Index r = 0; r < spec.t; ++r) {
        const double z = norm * w.row(o).dot(inst.features.row(r));
        double v = out.offset + out.scale * apply_mapping(spec.mapping, z);
        if (spec.noise_std > 0) v += spec.noise_std * normal(rng);
        if (out.integer) v = std::round(v);
        inst.theta(o * spec.t + r) = std::clamp(v, out.lo, out.hi);
      }
    }
    data.instances.push_back(std::move(inst));
  }
  return data;
}

namespace {

void write_row(std::ostream& os, const char* tag, const double* v, Index n) {
  os << tag << ' ';
  for (Index i = 0; i < n; ++i) {
    if (i > 0) os << ',';
    os << v[i];
  }
  os << '\n';
}

std::vector<double> parse_numbers(const std::string& text, std::size_t offset, std::size_t line_no) {
  std::vector<double> out;
  std::size_t pos = offset;
  while (true) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const char* first = text.data() + pos;
    const char* last = text.data() + text.size();
    const char* comma = std::find(first, last, ',');
    const char* end = comma;
    while (end > first && end[-1] == ' ') --end;
    double v = 0;
    const auto res = std::from_chars(first, end, v);
    if (res.ec != std::errc() || res.ptr != end || first == end) {
      throw ParseError("malformed number", line_no, pos + 1);
    }
    out.push_back(v);
    if (comma == last) break;
    pos = static_cast<std::size_t>(comma - text.data()) + 1;
  }
  return out;
}

std::vector<double> expect_row(std::istream& is, const std::string& tag, std::size_t& line_no) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("unexpected end of file after line " + std::to_string(line_no));
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string prefix = tag + ":";
  if (line.compare(0, prefix.size(), prefix) != 0) {
    throw ParseError("expected a '" + prefix + "' row", line_no, 1);
  }
  return parse_numbers(line, prefix.size(), line_no);
}

}  // namespace

void save_csv(const Dataset& data, const std::string& path) {
  check_dataset(data);
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << std::setprecision(17);
  os << data.t << ',' << data.m << ',' << data.size();
  if (data.k != 1) os << ',' << data.k;
  os << '\n';
  for (const auto& inst : data.instances) {
    write_row(os, "theta:", inst.theta.data(), inst.theta.size());
    for (Index r = 0; r < data.t; ++r) {
      const Eigen::RowVectorXd row = inst.features.row(r);
      write_row(os, "feat:", row.data(), row.size());
    }
  }
  if (!os) throw Error("failed writing " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw SchemaError("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = parse_numbers(line, 0, line_no);
  if (header.size() != 3 && header.size() != 4) throw SchemaError("header must be t,m,n or t,m,n,k");
  for (double h : header) {
    if (h != std::floor(h) || h < 0) throw SchemaError("header entries must be non-negative integers");
  }
  Dataset data;
  data.t = static_cast<Index>(header[0]);
  data.m = static_cast<Index>(header[1]);
  const auto n = static_cast<std::size_t>(header[2]);
  data.k = header.size() == 4 ? static_cast<Index>(header[3]) : 1;
  data.provenance = path;
  if (data.t < 1 || data.m < 1 || data.k < 1) throw SchemaError("t, m and k must be positive");

  for (std::size_t i = 0; i < n; ++i) {
    const auto theta = expect_row(is, "theta", line_no);
    if (static_cast<Index>(theta.size()) != data.t * data.k) {
      throw SchemaError("theta row at line " + std::to_string(line_no) + " has " + std::to_string(theta.size()) +
                        " values, header implies " + std::to_string(data.t * data.k));
    }
    Instance inst{MatrixXd(data.t, data.m), Eigen::Map<const VectorXd>(theta.data(), data.t * data.k)};
    for (Index r = 0; r < data.t; ++r) {
      const auto feat = expect_row(is, "feat", line_no);
      if (static_cast<Index>(feat.size()) != data.m) {
        throw SchemaError("feat row at line " + std::to_string(line_no) + " has " + std::to_string(feat.size()) +
                          " values, header says m = " + std::to_string(data.m));
      }
      inst.features.row(r) = Eigen::Map<const Eigen::RowVectorXd>(feat.data(), data.m);
    }
    data.instances.push_back(std::move(inst));
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line != "\r") throw SchemaError("more instances than the header declares");
  }
  check_dataset(data);
  return data;
}

namespace {

Dataset with_instances(const Dataset& data, std::vector<Instance> instances) {
  Dataset out;
  out.t = data.t;
  out.m = data.m;
  out.k = data.k;
  out.provenance = data.provenance;
  out.truth = data.truth;
  out.instances = std::move(instances);
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw DimensionMismatch("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  std::vector<Instance> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).push_back(data.instances[order[i]]);
  }
  return {with_instances(data, std::move(train)), with_instances(data, std::move(test))};
}

Dataset head(const Dataset& data, std::size_t count) {
  count = std::min(count, data.size());
  return with_instances(data, {data.instances.begin(), data.instances.begin() + static_cast<std::ptrdiff_t>(count)});
}

Dataset tail(const Dataset& data, std::size_t count) {
  count = std::min(count, data.size());
  return with_instances(data, {data.instances.end() - static_cast<std::ptrdiff_t>(count), data.instances.end()});
}

void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << std::setprecision(17) << net.layers.size() << '\n';
  for (const auto& layer : net.layers) {
    os << layer.W.rows() << ' ' << layer.W.cols() << '\n';
    for (Index i = 0; i < layer.W.rows(); ++i) {
      for (Index j = 0; j < layer.W.cols(); ++j) os << (j ? " " : "") << layer.W(i, j);
      os << '\n';
    }
    for (Index i = 0; i < layer.b.size(); ++i) os << (i ? " " : "") << layer.b(i);
    os << '\n';
  }
}

Mlp load_mlp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::size_t count = 0;
  if (!(is >> count) || count == 0) throw SchemaError("checkpoint has no layers");
  Mlp net;
  for (std::size_t l = 0; l < count; ++l) {
    Index rows = 0, cols = 0;
    if (!(is >> rows >> cols) || rows < 1 || cols < 1) throw SchemaError("bad layer shape in checkpoint");
    if (!net.layers.empty() && net.layers.back().W.rows() != cols) throw SchemaError("layer shapes do not chain");
    Layer layer{MatrixXd(rows, cols), VectorXd(rows)};
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (!(is >> layer.W(i, j))) throw SchemaError("truncated checkpoint");
    for (Index i = 0; i < rows; ++i)
      if (!(is >> layer.b(i))) throw SchemaError("truncated checkpoint");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace tspo
