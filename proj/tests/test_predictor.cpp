#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tspo/predictor.hpp"
#include "tspo/testutil.hpp"

using namespace tspo;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

// Second forward implementation: one row at a time, explicit loops.
VectorXd naive_forward(const Mlp& net, const MatrixXd& features) {
  const Index t = features.rows(), k = net.output_dim();
  VectorXd theta(t * k);
  for (Index j = 0; j < t; ++j) {
    std::vector<double> a(features.cols());
    for (Index i = 0; i < features.cols(); ++i) a[i] = features(j, i);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& L = net.layers[l];
      std::vector<double> z(L.W.rows());
      for (Index r = 0; r < L.W.rows(); ++r) {
        double s = L.b(r);
        for (Index c = 0; c < L.W.cols(); ++c) s += L.W(r, c) * a[c];
        z[r] = l + 1 < net.layers.size() ? std::max(0.0, s) : s;
      }
      a = z;
    }
    for (Index o = 0; o < k; ++o) theta(o * t + j) = a[o];
  }
  return theta;
}

double param_at(Mlp& net, std::size_t layer, Index idx, bool bias, double* set = nullptr) {
  double& ref = bias ? net.layers[layer].b(idx) : net.layers[layer].W.data()[idx];
  if (set) ref = *set;
  return ref;
}

}  // namespace

TEST_CASE("zero network outputs the last bias") {
  Mlp net = make_mlp({3, 4, 2}, 1);
  for (auto& l : net.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  net.layers.back().b << 1.5, -2;
  std::mt19937_64 rng(0);
  const auto res = forward(net, random_matrix(5, 3, rng));
  REQUIRE(res.theta.size() == 10);
  CHECK((res.theta.head(5).array() == 1.5).all());
  CHECK((res.theta.tail(5).array() == -2.0).all());
}

TEST_CASE("identity net reproduces the features") {
  Mlp net = make_mlp({1, 1}, 0);
  net.layers[0].W(0, 0) = 1;
  net.layers[0].b(0) = 0;
  const VectorXd f = Eigen::Vector4d(0.5, -1, 2, 3);
  CHECK(forward(net, f).theta == f);
}

TEST_CASE("forward matches an independent implementation") {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mlp net = make_mlp({4, 16, 16, 2}, seed);
    const MatrixXd f = random_matrix(7, 4, rng);
    const VectorXd a = forward(net, f).theta;
    CHECK((a - naive_forward(net, f)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(a == forward(net, f).theta);
    const MatrixXd rows = predict_rows(net, f);
    CHECK(VectorXd(Eigen::Map<const VectorXd>(rows.data(), rows.size())) == a);
  }
  CHECK_THROWS_AS(forward(make_mlp({3, 2}, 0), MatrixXd::Zero(2, 4)), DimensionMismatch);
}

TEST_CASE("xavier initialization bounds") {
  const Mlp net = make_mlp({8, 16, 1}, 11);
  CHECK(net.layers[0].W.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 24));
  CHECK(net.layers[1].W.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 17));
  CHECK(net.layers[0].b.isZero());
  CHECK(make_mlp({8, 16, 1}, 11).layers[0].W == net.layers[0].W);
}

TEST_CASE("backward with zero upstream is zero") {
  const Mlp net = make_mlp({3, 5, 1}, 2);
  std::mt19937_64 rng(1);
  auto res = forward(net, random_matrix(4, 3, rng));
  const auto g = backward(net, res.tape, VectorXd::Zero(4));
  for (const auto& l : g.layers) {
    CHECK(l.W.isZero());
    CHECK(l.b.isZero());
  }
}

TEST_CASE("single linear layer gradient is upstream times features") {
  const Mlp net = make_mlp({3, 1}, 4);
  std::mt19937_64 rng(2);
  const MatrixXd f = random_matrix(6, 3, rng);
  const VectorXd up = random_matrix(6, 1, rng);
  auto res = forward(net, f);
  const auto g = backward(net, res.tape, up);
  CHECK((g.layers[0].W - (up.transpose() * f)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(g.layers[0].b(0) - up.sum()) <= 1e-12);
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index hidden = seed % 2 == 0 ? 4 : 16;
    Mlp net = make_mlp({3, hidden, hidden, 2}, seed);
    for (auto& l : net.layers) l.b = random_matrix(l.b.size(), 1, rng) * 0.1;
    const MatrixXd f = random_matrix(5, 3, rng);
    const VectorXd up = random_matrix(10, 1, rng);
    auto res = forward(net, f);
    const auto g = backward(net, res.tape, up);

    double worst = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (int bias = 0; bias < 2; ++bias) {
        const Index count = bias ? net.layers[l].b.size() : net.layers[l].W.size();
        for (Index i = 0; i < count; ++i) {
          const double w0 = param_at(net, l, i, bias);
          auto loss = [&](const VectorXd& w) {
            double v = w(0);
            param_at(net, l, i, bias, &v);
            const double out = up.dot(forward(net, f).theta);
            param_at(net, l, i, bias, const_cast<double*>(&w0));
            return VectorXd::Constant(1, out);
          };
          const double fd = testutil::finite_diff_jacobian(loss, VectorXd::Constant(1, w0))(0, 0);
          const double an = bias ? g.layers[l].b(i) : g.layers[l].W.data()[i];
          worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
        }
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("tapes are single-use and tied to the network version") {
  Mlp net = make_mlp({2, 3, 1}, 5);
  auto res = forward(net, MatrixXd::Ones(2, 2));
  backward(net, res.tape, VectorXd::Ones(2));
  CHECK_THROWS_AS(backward(net, res.tape, VectorXd::Ones(2)), StaleTape);

  auto res2 = forward(net, MatrixXd::Ones(2, 2));
  auto state = make_adam(net, 1e-2);
  adam_step(net, state, zero_gradients(net));
  CHECK_THROWS_AS(backward(net, res2.tape, VectorXd::Ones(2)), StaleTape);

  GradientTape blank;
  CHECK_THROWS_AS(backward(net, blank, VectorXd::Ones(2)), StaleTape);
}

TEST_CASE("adam first step and zero gradient") {
  Mlp net = make_mlp({2, 1}, 6);
  const Mlp before = net;
  auto state = make_adam(net, 0.01);
  adam_step(net, state, zero_gradients(net));
  CHECK(net.layers[0].W == before.layers[0].W);
  CHECK(state.step == 1);

  net = before;
  state = make_adam(net, 0.01);
  MlpGradients g = zero_gradients(net);
  g.layers[0].W << 0.3, -2.0;
  g.layers[0].b << 1e-3;
  adam_step(net, state, g);
  for (Index i = 0; i < 2; ++i) {
    const double gi = g.layers[0].W(0, i);
    CHECK(net.layers[0].W(0, i) - before.layers[0].W(0, i) ==
          doctest::Approx(-0.01 * gi / (std::abs(gi) + state.eps)).epsilon(1e-12));
  }
}

TEST_CASE("adam steps approach the learning rate under a constant gradient") {
  Mlp net = make_mlp({1, 1}, 7);
  auto state = make_adam(net, 1e-3);
  MlpGradients g = zero_gradients(net);
  g.layers[0].W(0, 0) = 0.7;
  double prev = net.layers[0].W(0, 0), step = 0;
  for (int i = 0; i < 1000; ++i) {
    adam_step(net, state, g);
    step = prev - net.layers[0].W(0, 0);
    prev = net.layers[0].W(0, 0);
  }
  CHECK(std::abs(step - 1e-3) <= 1e-5);
}

TEST_CASE("ridge regression") {
  std::mt19937_64 rng(21);
  const MatrixXd X = random_matrix(30, 4, rng);
  const VectorXd w = Eigen::Vector4d(1, -2, 0.5, 3);
  CHECK((ridge_fit(X, X * w, 0) - w).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(ridge_fit(X, X * w, 1e12).cwiseAbs().maxCoeff() <= 1e-6);

  const VectorXd y = random_matrix(30, 1, rng);
  const VectorXd fit = ridge_fit(X, y, 1.0);
  // oracle: Gauss-Jordan on the regularized normal equations
  MatrixXd N = X.transpose() * X + MatrixXd::Identity(4, 4);
  VectorXd oracle;
  REQUIRE(testutil::gauss_solve(N, X.transpose() * y, oracle));
  CHECK((fit - oracle).cwiseAbs().maxCoeff() <= 1e-10);
  const VectorXd xty = X.transpose() * y;
  CHECK((N * fit - xty).cwiseAbs().maxCoeff() <= 1e-8 * (1 + xty.cwiseAbs().maxCoeff()));

  CHECK(ridge_predict(w, Eigen::Vector4d(1, 1, 1, 1)) == doctest::Approx(2.5));
  MatrixXd collinear(3, 2);
  collinear << 1, 2, 2, 4, 3, 6;
  CHECK_THROWS_AS(ridge_fit(collinear, VectorXd::Ones(3), 0), SingularSystem);
  CHECK_NOTHROW(ridge_fit(collinear, VectorXd::Ones(3), 0.1));
}

TEST_CASE("k nearest neighbours") {
  std::mt19937_64 rng(33);
  const MatrixXd X = random_matrix(20, 3, rng);
  const VectorXd y = random_matrix(20, 1, rng);
  CHECK(knn_predict(X, y, 1, X.row(7).transpose()) == y(7));
  CHECK(knn_predict(X, y, 20, VectorXd::Zero(3)) == doctest::Approx(y.mean()));

  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd q = random_matrix(3, 1, rng);
    std::vector<std::pair<double, Index>> d;
    for (Index i = 0; i < 20; ++i) d.emplace_back((X.row(i).transpose() - q).norm(), i);
    std::sort(d.begin(), d.end());
    const double want = (y(d[0].second) + y(d[1].second) + y(d[2].second)) / 3;
    CHECK(knn_predict(X, y, 3, q) == doctest::Approx(want).epsilon(1e-12));
  }

  // equidistant rows: the lower index wins
  MatrixXd tie(3, 1);
  tie << 1, -1, 1;
  CHECK(knn_predict(tie, Eigen::Vector3d(10, 20, 30), 1, VectorXd::Zero(1)) == 10);
  CHECK_THROWS_AS(knn_predict(MatrixXd(0, 2), VectorXd(0), 1, VectorXd::Zero(2)), EmptyTrainSet);
}
