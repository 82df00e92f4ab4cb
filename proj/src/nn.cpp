#include "ptvae/nn.hpp"

#include <cmath>

#include "ptvae/random.hpp"

namespace ptvae::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::exponential: return "exponential";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "exponential") return Activation::exponential;
  throw Error("unknown activation '" + s + "'");
}

void Mlp::check() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.biases.size() != l.out_dim()) {
      throw Error("layer " + std::to_string(i) + ": bias length does not match output size");
    }
    if (i > 0 && l.in_dim() != layers[i - 1].out_dim()) {
      throw Error("layer " + std::to_string(i) + " expects " + std::to_string(l.in_dim()) +
                  " inputs, previous layer emits " + std::to_string(layers[i - 1].out_dim()));
    }
  }
}

Vector activate(Activation a, const Vector& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return x.array().tanh();
    case Activation::sigmoid: return 1.0 / (1.0 + (-x.array()).exp());
    case Activation::exponential: return x.array().exp();
  }
  return x;
}

Vector layer_forward(const DenseLayer& layer, const Vector& x) {
  if (x.size() != layer.in_dim()) {
    throw Error("layer_forward: input has " + std::to_string(x.size()) + " values, layer expects " +
                std::to_string(layer.in_dim()));
  }
  return activate(layer.activation, layer.weights * x + layer.biases);
}

Vector mlp_forward(const Mlp& mlp, const Vector& x) {
  Vector h = x;
  for (const auto& l : mlp.layers) h = layer_forward(l, h);
  return h;
}

grad::Var activate(Activation a, const grad::Var& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return grad::tanh(x);
    case Activation::sigmoid: return grad::sigmoid(x);
    case Activation::exponential: return grad::exp(x);
  }
  return x;
}

LayerVars register_layer(grad::Tape& tape, const DenseLayer& layer) {
  return {tape.variable(layer.weights), tape.variable(Matrix(layer.biases))};
}

grad::Var layer_forward(const LayerVars& vars, Activation a, const grad::Var& x) {
  return activate(a, grad::affine(x, vars.weights, vars.biases));
}

DenseLayer init_layer(Eigen::Index in, Eigen::Index out, Activation a, std::uint64_t seed) {
  if (in < 1 || out < 1) throw Error("init_layer: dimensions must be positive");
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  DenseLayer l;
  l.weights.resize(out, in);
  // row-major draw order so the stream matches the serialized layout
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = u(rng);
  }
  l.biases = Vector::Zero(out);
  l.activation = a;
  return l;
}

Mlp init_params(std::span<const Eigen::Index> dims, Activation hidden, Activation output,
                std::uint64_t seed) {
  if (dims.size() < 2) throw Error("init_params: need at least input and output dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    m.layers.push_back(init_layer(dims[i], dims[i + 1], last ? output : hidden,
                                  derive_seed(seed, i)));
  }
  return m;
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw Error("unknown optimizer '" + s + "'");
}

OptimizerState::OptimizerState(OptimizerKind k, double lr) : kind(k), learning_rate(lr) {
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
}

void step(OptimizerState& s, std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw Error("step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
      throw Error("step: gradient " + std::to_string(i) + " shape mismatch");
    }
  }
  if (s.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= s.learning_rate * grads[i];
    ++s.step_count;
    return;
  }
  if (s.first_moment.size() != params.size()) {
    s.first_moment.clear();
    s.second_moment.clear();
    for (auto* p : params) {
      s.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      s.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++s.step_count;
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = s.first_moment[i];
    auto& v = s.second_moment[i];
    m = s.beta1 * m + (1.0 - s.beta1) * grads[i];
    v = s.beta2 * v + (1.0 - s.beta2) * grads[i].cwiseAbs2();
    params[i]->array() -=
        s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  }
}

double step_scalar(OptimizerState& state, double param, double gradient) {
  Matrix p = Matrix::Constant(1, 1, param);
  Matrix g = Matrix::Constant(1, 1, gradient);
  Matrix* ps[] = {&p};
  step(state, ps, std::span<const Matrix>(&g, 1));
  return p(0, 0);
}

void to_json(nlohmann::json& j, const DenseLayer& l) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(l.weights.size()));
  for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
  }
  j = nlohmann::json{{"in", l.in_dim()},
                     {"out", l.out_dim()},
                     {"activation", to_string(l.activation)},
                     {"weights", w},
                     {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}};
}

void from_json(const nlohmann::json& j, DenseLayer& l) {
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("biases").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
    throw Error("layer json: weight/bias sizes do not match dimensions");
  }
  l.weights.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
  }
  l.biases = Eigen::Map<const Vector>(b.data(), out);
  l.activation = activation_from_string(j.at("activation").get<std::string>());
}

void to_json(nlohmann::json& j, const Mlp& m) { j = nlohmann::json{{"layers", m.layers}}; }

void from_json(const nlohmann::json& j, Mlp& m) {
  m.layers = j.at("layers").get<std::vector<DenseLayer>>();
  m.check();
}

}  // namespace ptvae::nn
