#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ptvae/nn.hpp"

using namespace ptvae;
using namespace ptvae::nn;

TEST_CASE("dense layer special cases") {
  DenseLayer zero{Matrix::Zero(3, 2), Vector::Zero(3), Activation::tanh};
  CHECK(layer_forward(zero, Vector::Constant(2, 4.0)).norm() == 0.0);

  DenseLayer id{Matrix::Identity(3, 3), Vector::Zero(3), Activation::identity};
  Vector x(3);
  x << 1, -2, 3;
  CHECK(layer_forward(id, x) == x);

  DenseLayer one{Matrix::Ones(1, 1), Vector::Zero(1), Activation::sigmoid};
  CHECK(layer_forward(one, Vector::Zero(1))(0) == 0.5);

  CHECK_THROWS_AS(layer_forward(id, Vector::Zero(2)), Error);
}

TEST_CASE("tape forward agrees with the plain forward pass") {
  const std::vector<Eigen::Index> dims{4, 5, 3};
  const auto mlp = init_params(dims, Activation::tanh, Activation::sigmoid, 5);
  Vector x(4);
  x << 0.1, -0.3, 0.7, 2.0;
  grad::Tape t;
  grad::Var h = t.constant(Matrix(x.transpose()));
  for (const auto& l : mlp.layers) h = layer_forward(register_layer(t, l), l.activation, h);
  const Vector plain = mlp_forward(mlp, x);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(h.value()(0, i) == doctest::Approx(plain(i)).epsilon(1e-14));
}

TEST_CASE("three-layer tanh network gradient matches finite differences") {
  const std::vector<Eigen::Index> dims{3, 4, 4, 2};
  auto mlp = init_params(dims, Activation::tanh, Activation::tanh, 8);
  Rng rng(2);
  std::normal_distribution<double> nd;
  Matrix x(2, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);

  auto forward = [&](const Mlp& m, grad::Tape& t, std::vector<LayerVars>& vars) {
    grad::Var h = t.constant(x);
    for (const auto& l : m.layers) {
      vars.push_back(register_layer(t, l));
      h = layer_forward(vars.back(), l.activation, h);
    }
    return grad::sum(grad::square(h));
  };
  grad::Tape t;
  std::vector<LayerVars> vars;
  t.backward(forward(mlp, t, vars));

  for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
    auto& w = mlp.layers[li].weights;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double w0 = w.data()[k];
      auto eval = [&](double v) {
        w.data()[k] = v;
        grad::Tape tt;
        std::vector<LayerVars> vv;
        const double r = forward(mlp, tt, vv).scalar();
        w.data()[k] = w0;
        return r;
      };
      const double fd = (eval(w0 + 1e-5) - eval(w0 - 1e-5)) / 2e-5;
      CHECK(testing::relative_error(vars[li].weights.grad().data()[k], fd) < 1e-4);
    }
  }
}

TEST_CASE("optimizer steps") {
  OptimizerState sgd(OptimizerKind::sgd, 0.1);
  CHECK(step_scalar(sgd, 1.0, 1.0) == doctest::Approx(0.9));
  CHECK(step_scalar(sgd, 1.0, 0.0) == 1.0);

  OptimizerState adam0(OptimizerKind::adam, 0.01);
  CHECK(step_scalar(adam0, 1.0, 0.0) == 1.0);

  for (double g : {1e-3, 1.0, 1e3}) {
    OptimizerState adam(OptimizerKind::adam, 0.01);
    const double p = step_scalar(adam, 1.0, g);
    CHECK(1.0 - p == doctest::Approx(0.01).epsilon(1e-4));
  }
  CHECK_THROWS_AS(OptimizerState(OptimizerKind::adam, 0.0), Error);
}

TEST_CASE("glorot init is deterministic with zero biases") {
  const auto a = init_layer(200, 300, Activation::tanh, 42);
  const auto b = init_layer(200, 300, Activation::tanh, 42);
  CHECK(a.weights == b.weights);
  CHECK(a.biases.norm() == 0.0);
  CHECK(std::abs(a.weights.mean()) < 0.05);
  const double bound = std::sqrt(6.0 / 500.0);
  CHECK(a.weights.maxCoeff() <= bound);
  CHECK(a.weights.minCoeff() >= -bound);
  CHECK(init_layer(200, 300, Activation::tanh, 43).weights != a.weights);
}

TEST_CASE("mlp json round trip") {
  const std::vector<Eigen::Index> dims{2, 3, 1};
  const auto m = init_params(dims, Activation::tanh, Activation::exponential, 1);
  const Mlp back = nlohmann::json(m).get<Mlp>();
  REQUIRE(back.layers.size() == 2);
  CHECK(back.layers[0].weights == m.layers[0].weights);
  CHECK(back.layers[1].activation == Activation::exponential);
}
