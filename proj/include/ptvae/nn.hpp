#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ptvae/grad.hpp"

namespace ptvae::nn {

using grad::Matrix;
using Vector = Eigen::VectorXd;

enum class Activation { identity, tanh, sigmoid, exponential };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// a = g(W x + b), W is out x in.
struct DenseLayer {
  Matrix weights;
  Vector biases;
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::Index in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  /// Throws if consecutive layer dimensions do not chain.
  void check() const;
};

Vector activate(Activation a, const Vector& x);

/// Single-sample forward pass.
Vector layer_forward(const DenseLayer& layer, const Vector& x);
Vector mlp_forward(const Mlp& mlp, const Vector& x);

/// Tape versions over a batch x (rows are samples).
grad::Var activate(Activation a, const grad::Var& x);

/// Parameters of one layer registered on a tape.
struct LayerVars {
  grad::Var weights;
  grad::Var biases;
};

LayerVars register_layer(grad::Tape& tape, const DenseLayer& layer);
grad::Var layer_forward(const LayerVars& vars, Activation a, const grad::Var& x);

/// Glorot-uniform weights, zero biases. dims = {in, h1, ..., out}; every layer
/// gets the same activation except the last, which gets `output`.
Mlp init_params(std::span<const Eigen::Index> dims, Activation hidden, Activation output,
                std::uint64_t seed);
DenseLayer init_layer(Eigen::Index in, Eigen::Index out, Activation a, std::uint64_t seed);

// ---- optimizers --------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  OptimizerState() = default;
  OptimizerState(OptimizerKind k, double lr);
};

/// One descent step: params[i] -= update(grads[i]). Moment buffers are
/// allocated on first use.
void step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix> grads);

/// Scalar convenience for single-parameter descent.
double step_scalar(OptimizerState& state, double param, double gradient);

void to_json(nlohmann::json& j, const DenseLayer& l);
void from_json(const nlohmann::json& j, DenseLayer& l);
void to_json(nlohmann::json& j, const Mlp& m);
void from_json(const nlohmann::json& j, Mlp& m);

}  // namespace ptvae::nn
