#pragma once

// Feature-to-parameter models. The MLP is one shared network applied to each
// feature row: row j of a t x m feature matrix yields outputs for parameter
// row j. With k outputs per row, the parameter vector is output-major,
// theta[o * t + j].

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "tspo/errors.hpp"

namespace tspo {

struct Layer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

/// ReLU on hidden layers, identity on the output layer.
struct Mlp {
  std::vector<Layer> layers;
  /// Bumped on every parameter update so stale tapes are detected.
  std::uint64_t version = 0;

  Eigen::Index input_dim() const { return layers.front().W.cols(); }
  Eigen::Index output_dim() const { return layers.back().W.rows(); }
};

/// Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
/// `sizes` lists every layer width, input first and output last.
Mlp make_mlp(const std::vector<Eigen::Index>& sizes, std::uint64_t seed);

/// Same shapes as the network; one entry per layer.
struct MlpGradients {
  std::vector<Layer> layers;
};

MlpGradients zero_gradients(const Mlp& net);

struct ForwardResult;

class GradientTape {
 public:
  GradientTape() = default;

 private:
  friend ForwardResult forward(const Mlp& net, const Eigen::MatrixXd& features);
  friend MlpGradients backward(const Mlp& net, GradientTape& tape, const Eigen::VectorXd& upstream);

  std::vector<Eigen::MatrixXd> inputs_;  // input to each layer, rows are samples
  std::vector<Eigen::MatrixXd> pre_;     // pre-activation of each layer
  std::uint64_t version_ = 0;
  const Mlp* owner_ = nullptr;
  bool consumed_ = true;
};

struct ForwardResult {
  Eigen::VectorXd theta;  // output-major, length t * k
  GradientTape tape;
};

ForwardResult forward(const Mlp& net, const Eigen::MatrixXd& features);

/// Outputs as a t x k matrix, without recording a tape.
Eigen::MatrixXd predict_rows(const Mlp& net, const Eigen::MatrixXd& features);

/// dL/dw given dL/dtheta (output-major). Consumes the tape; throws StaleTape
/// on reuse or if the network changed since the forward pass.
MlpGradients backward(const Mlp& net, GradientTape& tape, const Eigen::VectorXd& upstream);

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0;
};

AdamState make_adam(const Mlp& net, double lr);

/// Bias-corrected Adam update of every weight and bias.
void adam_step(Mlp& net, AdamState& state, const MlpGradients& grads);

/// argmin |X w - y|^2 + lambda |w|^2 by the regularized normal equations.
/// Throws SingularSystem when lambda = 0 and X^T X is singular.
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

double ridge_predict(const Eigen::VectorXd& w, const Eigen::VectorXd& x);

/// Mean target of the k rows of X closest to `query` in Euclidean distance,
/// ties broken by lower row index.
double knn_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index k, const Eigen::VectorXd& query);

}  // namespace tspo
