#pragma once

// Datasets of (feature matrix, parameter vector) pairs, a synthetic generator
// with a known ground truth, CSV storage, splits, and network checkpoints.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tspo/errors.hpp"
#include "tspo/predictor.hpp"

namespace tspo {

/// features is t x m. theta has t * k entries, output-major.
struct Instance {
  Eigen::MatrixXd features;
  Eigen::VectorXd theta;
};

struct Dataset {
  Eigen::Index t = 0;
  Eigen::Index m = 0;
  Eigen::Index k = 1;
  std::vector<Instance> instances;
  std::string provenance;
  /// Ground-truth weights (k x m) when the data is synthetic.
  std::optional<Eigen::MatrixXd> truth;

  std::size_t size() const { return instances.size(); }
};

/// Throws SchemaError unless every instance matches (t, m, k) and is finite.
void check_dataset(const Dataset& data);

enum class Mapping { Linear, ReluBump, SineMix };

/// g(z) for each mapping: z, max(0, z) + max(0, 1 - |z|), sin(2z) + z / 2.
double apply_mapping(Mapping g, double z);
Mapping mapping_from_name(const std::string& name);
std::string mapping_name(Mapping g);

struct OutputSpec {
  double scale = 1;
  double offset = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  /// Round to the nearest integer before clamping.
  bool integer = false;
};

/// Features are i.i.d. standard normal. Output o of row j is
///   clamp(offset_o + scale_o * g(w_o . feat_j / sqrt(m)) + noise_std * eps)
/// with w_o standard normal, drawn once per dataset.
struct SynthSpec {
  Eigen::Index t = 1;
  Eigen::Index m = 8;
  Eigen::Index n = 1;
  Mapping mapping = Mapping::Linear;
  double noise_std = 0;
  /// One entry per output; its size is k.
  std::vector<OutputSpec> outputs{OutputSpec{}};
};

Dataset generate(const SynthSpec& spec, std::uint64_t seed);

/// Header `t,m,n` (or `t,m,n,k` when k > 1), then per instance a
/// `theta: ...` line followed by t `feat: ...` lines.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

/// Seeded shuffle, then the first round(fraction * n) instances train.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Leading and trailing parts of a dataset, in order.
Dataset head(const Dataset& data, std::size_t count);
Dataset tail(const Dataset& data, std::size_t count);

/// Text checkpoint: layer count, then per layer `rows cols`, row-major
/// weights, and the bias.
void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace tspo
