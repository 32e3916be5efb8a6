#include "tspo/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tspo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Mlp make_mlp(const std::vector<Index>& sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw DimensionMismatch("an MLP needs at least an input and an output size");
  std::mt19937_64 rng(seed);
  Mlp net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Index in = sizes[l], out = sizes[l + 1];
    if (in < 1 || out < 1) throw DimensionMismatch("layer sizes must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer layer{MatrixXd(out, in), VectorXd::Zero(out)};
    for (Index i = 0; i < out; ++i)
      for (Index j = 0; j < in; ++j) layer.W(i, j) = u(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

MlpGradients zero_gradients(const Mlp& net) {
  MlpGradients g;
  for (const auto& layer : net.layers) {
    g.layers.push_back({MatrixXd::Zero(layer.W.rows(), layer.W.cols()), VectorXd::Zero(layer.b.size())});
  }
  return g;
}

namespace {

MatrixXd affine(const Layer& layer, const MatrixXd& in) {
  MatrixXd z = in * layer.W.transpose();
  z.rowwise() += layer.b.transpose();
  return z;
}

}  // namespace

ForwardResult forward(const Mlp& net, const MatrixXd& features) {
  if (features.cols() != net.input_dim()) throw DimensionMismatch("feature rows have the wrong length");
  ForwardResult out;
  auto& tape = out.tape;
  MatrixXd a = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    tape.inputs_.push_back(a);
    MatrixXd z = affine(net.layers[l], a);
    tape.pre_.push_back(z);
    a = l + 1 < net.layers.size() ? MatrixXd(z.cwiseMax(0.0)) : z;
  }
  out.theta = Eigen::Map<const VectorXd>(a.data(), a.size());  // column-major = output-major
  tape.version_ = net.version;
  tape.owner_ = &net;
  tape.consumed_ = false;
  return out;
}

MatrixXd predict_rows(const Mlp& net, const MatrixXd& features) {
  if (features.cols() != net.input_dim()) throw DimensionMismatch("feature rows have the wrong length");
  MatrixXd a = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    MatrixXd z = affine(net.layers[l], a);
    a = l + 1 < net.layers.size() ? MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

MlpGradients backward(const Mlp& net, GradientTape& tape, const VectorXd& upstream) {
  if (tape.consumed_ || tape.owner_ != &net || tape.version_ != net.version) {
    throw StaleTape("gradient tape does not belong to the current network state");
  }
  tape.consumed_ = true;
  const Index t = tape.inputs_.front().rows();
  const Index k = net.output_dim();
  if (upstream.size() != t * k) throw DimensionMismatch("upstream gradient has the wrong length");

  MlpGradients grads = zero_gradients(net);
  MatrixXd delta = Eigen::Map<const MatrixXd>(upstream.data(), t, k);
  for (Index l = static_cast<Index>(net.layers.size()) - 1; l >= 0; --l) {
    if (l + 1 < static_cast<Index>(net.layers.size())) {
      delta = delta.cwiseProduct((tape.pre_[l].array() > 0).cast<double>().matrix());
    }
    grads.layers[l].W.noalias() = delta.transpose() * tape.inputs_[l];
    grads.layers[l].b = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * net.layers[l].W;
  }
  return grads;
}

AdamState make_adam(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = zero_gradients(net).layers;
  s.v = s.m;
  return s;
}

void adam_step(Mlp& net, AdamState& state, const MlpGradients& grads) {
  if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size()) {
    throw DimensionMismatch("gradient and optimizer state must match the network");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto update = [&](auto& w, const auto& g_raw, auto& m, auto& v) {
    const auto g = (g_raw + state.weight_decay * w).eval();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    w.array() -= state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].W, grads.layers[l].W, state.m[l].W, state.v[l].W);
    update(net.layers[l].b, grads.layers[l].b, state.m[l].b, state.v[l].b);
  }
  ++net.version;
}

VectorXd ridge_fit(const MatrixXd& X, const VectorXd& y, double lambda) {
  if (X.rows() < 1) throw EmptyTrainSet("ridge regression needs at least one row");
  if (X.rows() != y.size()) throw DimensionMismatch("X and y disagree on the number of rows");
  if (lambda < 0) throw DimensionMismatch("lambda must be non-negative");
  MatrixXd normal = X.transpose() * X;
  normal.diagonal().array() += lambda;
  const VectorXd rhs = X.transpose() * y;
  Eigen::LDLT<MatrixXd> ldlt(normal);
  const double scale = std::max(1.0, normal.diagonal().cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-12 * scale) {
    throw SingularSystem("normal equations are singular");
  }
  return ldlt.solve(rhs);
}

double ridge_predict(const VectorXd& w, const VectorXd& x) {
  if (w.size() != x.size()) throw DimensionMismatch("ridge weights and features differ in length");
  return w.dot(x);
}

double knn_predict(const MatrixXd& X, const VectorXd& y, Index k, const VectorXd& query) {
  const Index n = X.rows();
  if (n == 0) throw EmptyTrainSet("k-NN needs a non-empty training set");
  if (k < 1 || k > n) throw DimensionMismatch("k must lie in [1, n]");
  if (query.size() != X.cols()) throw DimensionMismatch("query has the wrong number of features");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  VectorXd dist(n);
  for (Index i = 0; i < n; ++i) dist(i) = (X.row(i).transpose() - query).squaredNorm();
  std::stable_sort(order.begin(), order.end(), [&dist](Index a, Index b) { return dist(a) < dist(b); });
  double sum = 0;
  for (Index i = 0; i < k; ++i) sum += y(order[i]);
  return sum / static_cast<double>(k);
}

}  // namespace tspo
