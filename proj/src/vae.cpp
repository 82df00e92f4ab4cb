#include "ptvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ptvae/random.hpp"
#include "ptvae/transform.hpp"

namespace ptvae::vae {

using grad::Tape;
using grad::Var;

void VaeArchitecture::check() const {
  if (schema.empty()) throw Error("VAE architecture needs at least one column");
  if (hidden_dim < 1 || latent_dim < 1) throw Error("VAE hidden and latent dims must be >= 1");
  if (continuous_columns.size() + binary_columns.size() != schema.size()) {
    throw Error("VAE architecture: continuous + binary counts do not match the schema");
  }
}

VaeArchitecture make_architecture(const Schema& schema, Eigen::Index hidden_dim,
                                  Eigen::Index latent_dim) {
  VaeArchitecture a;
  a.schema = schema;
  a.hidden_dim = hidden_dim > 0 ? hidden_dim : static_cast<Eigen::Index>(schema.size());
  a.latent_dim = latent_dim;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    (schema[j].kind == ColumnKind::binary ? a.binary_columns : a.continuous_columns).push_back(j);
  }
  a.check();
  return a;
}

void TrainConfig::check() const {
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
}

VaeModel VaeModel::init(const VaeArchitecture& arch, std::uint64_t seed) {
  arch.check();
  using nn::Activation;
  VaeModel m;
  m.arch = arch;
  const auto p = arch.input_dim(), h = arch.hidden_dim, l = arch.latent_dim;
  const auto pc = arch.continuous_dim(), pb = arch.binary_dim();
  m.encoder_trunk.layers.push_back(nn::init_layer(p, h, Activation::tanh, derive_seed(seed, 1)));
  m.encoder_mu = nn::init_layer(h, l, Activation::identity, derive_seed(seed, 2));
  m.encoder_logvar = nn::init_layer(h, l, Activation::identity, derive_seed(seed, 3));
  m.decoder_trunk.layers.push_back(nn::init_layer(l, h, Activation::tanh, derive_seed(seed, 4)));
  // Heads with zero outputs still need a well-formed 0 x h shape.
  auto head = [&](Eigen::Index out, std::uint64_t stream) {
    if (out == 0) return nn::DenseLayer{Matrix(0, h), Vector(0), Activation::identity};
    return nn::init_layer(h, out, Activation::identity, derive_seed(seed, stream));
  };
  m.decoder_mu = head(pc, 5);
  m.decoder_logvar = head(pc, 6);
  m.decoder_logit = head(pb, 7);
  return m;
}

void VaeModel::zero_heads() {
  for (auto* l : {&encoder_mu, &encoder_logvar, &decoder_mu, &decoder_logvar, &decoder_logit}) {
    l->weights.setZero();
    l->biases.setZero();
  }
}

namespace {

std::vector<nn::DenseLayer*> all_layers(VaeModel& m) {
  std::vector<nn::DenseLayer*> out;
  for (auto& l : m.encoder_trunk.layers) out.push_back(&l);
  out.push_back(&m.encoder_mu);
  out.push_back(&m.encoder_logvar);
  for (auto& l : m.decoder_trunk.layers) out.push_back(&l);
  out.push_back(&m.decoder_mu);
  out.push_back(&m.decoder_logvar);
  out.push_back(&m.decoder_logit);
  return out;
}

/// Rows of `data` in internal (continuous, binary) layout.
Matrix internal_matrix(const Dataset& data, const VaeArchitecture& arch) {
  if (data.schema() != arch.schema) throw Error("dataset schema does not match the VAE architecture");
  Matrix x(static_cast<Eigen::Index>(data.rows()), arch.input_dim());
  Eigen::Index c = 0;
  for (std::size_t j : arch.continuous_columns) {
    for (std::size_t i = 0; i < data.rows(); ++i) x(static_cast<Eigen::Index>(i), c) = data.at(i, j);
    ++c;
  }
  for (std::size_t j : arch.binary_columns) {
    for (std::size_t i = 0; i < data.rows(); ++i) x(static_cast<Eigen::Index>(i), c) = data.at(i, j);
    ++c;
  }
  return x;
}

Vector to_internal(const Vector& x, const VaeArchitecture& arch) {
  if (x.size() != arch.input_dim()) {
    throw Error("expected " + std::to_string(arch.input_dim()) + " values, got " +
                std::to_string(x.size()));
  }
  Vector out(x.size());
  Eigen::Index c = 0;
  for (std::size_t j : arch.continuous_columns) out(c++) = x(static_cast<Eigen::Index>(j));
  for (std::size_t j : arch.binary_columns) out(c++) = x(static_cast<Eigen::Index>(j));
  return out;
}

Dataset from_internal(const Matrix& x, const VaeArchitecture& arch) {
  std::vector<std::vector<double>> cols(arch.schema.size());
  Eigen::Index c = 0;
  auto fill = [&](std::size_t j) {
    cols[j].resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) cols[j][static_cast<std::size_t>(i)] = x(i, c);
    ++c;
  };
  for (std::size_t j : arch.continuous_columns) fill(j);
  for (std::size_t j : arch.binary_columns) fill(j);
  return Dataset(arch.schema, std::move(cols));
}

struct ModelVars {
  std::vector<nn::LayerVars> enc_trunk;
  nn::LayerVars enc_mu, enc_logvar;
  std::vector<nn::LayerVars> dec_trunk;
  nn::LayerVars dec_mu, dec_logvar, dec_logit;
};

ModelVars register_model(Tape& tape, const VaeModel& m) {
  ModelVars v;
  for (const auto& l : m.encoder_trunk.layers) v.enc_trunk.push_back(nn::register_layer(tape, l));
  v.enc_mu = nn::register_layer(tape, m.encoder_mu);
  v.enc_logvar = nn::register_layer(tape, m.encoder_logvar);
  for (const auto& l : m.decoder_trunk.layers) v.dec_trunk.push_back(nn::register_layer(tape, l));
  v.dec_mu = nn::register_layer(tape, m.decoder_mu);
  v.dec_logvar = nn::register_layer(tape, m.decoder_logvar);
  v.dec_logit = nn::register_layer(tape, m.decoder_logit);
  return v;
}

std::vector<Var> flat_vars(const ModelVars& v) {
  std::vector<Var> out;
  auto push = [&](const nn::LayerVars& l) {
    out.push_back(l.weights);
    out.push_back(l.biases);
  };
  for (const auto& l : v.enc_trunk) push(l);
  push(v.enc_mu);
  push(v.enc_logvar);
  for (const auto& l : v.dec_trunk) push(l);
  push(v.dec_mu);
  push(v.dec_logvar);
  push(v.dec_logit);
  return out;
}

// Summed negative ELBO over the rows of x (internal layout).
Var batch_loss(Tape& tape, const ModelVars& v, const VaeModel& m, const Matrix& x,
               const Matrix& noise) {
  const auto pc = m.arch.continuous_dim();
  const auto pb = m.arch.binary_dim();
  Var h = tape.constant(x);
  for (std::size_t i = 0; i < v.enc_trunk.size(); ++i) {
    h = nn::layer_forward(v.enc_trunk[i], m.encoder_trunk.layers[i].activation, h);
  }
  Var mu = grad::affine(h, v.enc_mu.weights, v.enc_mu.biases);
  Var logvar = grad::affine(h, v.enc_logvar.weights, v.enc_logvar.biases);
  Var z = mu + grad::exp(grad::scale(logvar, 0.5)) * tape.constant(noise);
  Var f = z;
  for (std::size_t i = 0; i < v.dec_trunk.size(); ++i) {
    f = nn::layer_forward(v.dec_trunk[i], m.decoder_trunk.layers[i].activation, f);
  }
  Var kl = grad::scale(
      grad::sum(grad::add_scalar(grad::square(mu) + grad::exp(logvar) - logvar, -1.0)), 0.5);
  Var total = kl;
  if (pc > 0) {
    Var mux = grad::affine(f, v.dec_mu.weights, v.dec_mu.biases);
    Var lvx = grad::affine(f, v.dec_logvar.weights, v.dec_logvar.biases);
    Var xc = tape.constant(x.leftCols(pc));
    Var nll = grad::add_scalar(lvx + grad::square(xc - mux) * grad::exp(-lvx),
                               std::log(2.0 * std::numbers::pi));
    total = total + grad::scale(grad::sum(nll), 0.5);
  }
  if (pb > 0) {
    Var logit = grad::affine(f, v.dec_logit.weights, v.dec_logit.biases);
    Var pi = grad::clamp(grad::sigmoid(logit), kPiClamp, 1.0 - kPiClamp);
    const Matrix xb = x.rightCols(pb);
    Var ll = tape.constant(xb) * grad::log(pi) +
             tape.constant(Matrix(1.0 - xb.array())) * grad::log(grad::add_scalar(-pi, 1.0));
    total = total - grad::sum(ll);
  }
  return total;
}

Matrix forward_batch(const nn::DenseLayer& l, const Matrix& x) {
  Matrix y = x * l.weights.transpose();
  y.rowwise() += l.biases.transpose();
  switch (l.activation) {
    case nn::Activation::identity: break;
    case nn::Activation::tanh: y = y.array().tanh(); break;
    case nn::Activation::sigmoid: y = 1.0 / (1.0 + (-y.array()).exp()); break;
    case nn::Activation::exponential: y = y.array().exp(); break;
  }
  return y;
}

Matrix trunk_batch(const nn::Mlp& mlp, Matrix x) {
  for (const auto& l : mlp.layers) x = forward_batch(l, x);
  return x;
}

// Decode latent rows and sample data rows (internal layout).
Matrix sample_rows(const VaeModel& m, const Matrix& z, Rng& rng) {
  const auto pc = m.arch.continuous_dim();
  const auto pb = m.arch.binary_dim();
  const Matrix f = trunk_batch(m.decoder_trunk, z);
  const Matrix mux = forward_batch(m.decoder_mu, f);
  const Matrix sdx = (0.5 * forward_batch(m.decoder_logvar, f).array()).exp();
  const Matrix pi = 1.0 / (1.0 + (-forward_batch(m.decoder_logit, f).array()).exp());
  Matrix out(z.rows(), pc + pb);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < pc; ++j) out(i, j) = mux(i, j) + sdx(i, j) * normal(rng);
    for (Eigen::Index k = 0; k < pb; ++k) out(i, pc + k) = unif(rng) < pi(i, k) ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace

Encoding encode(const VaeModel& model, const Vector& x) {
  Vector h = nn::mlp_forward(model.encoder_trunk, to_internal(x, model.arch));
  Encoding e;
  e.mu = nn::layer_forward(model.encoder_mu, h);
  e.sigma = (0.5 * nn::layer_forward(model.encoder_logvar, h).array()).exp();
  return e;
}

Decoding decode(const VaeModel& model, const Vector& z) {
  if (z.size() != model.arch.latent_dim) {
    throw Error("decode: latent vector has " + std::to_string(z.size()) + " values, expected " +
                std::to_string(model.arch.latent_dim));
  }
  Vector f = nn::mlp_forward(model.decoder_trunk, z);
  Decoding d;
  d.mu = nn::layer_forward(model.decoder_mu, f);
  d.sigma = (0.5 * nn::layer_forward(model.decoder_logvar, f).array()).exp();
  d.pi = nn::activate(nn::Activation::sigmoid, nn::layer_forward(model.decoder_logit, f));
  return d;
}

Vector reparameterize(const Vector& mu, const Vector& sigma, const Vector& noise) {
  if (mu.size() != sigma.size() || mu.size() != noise.size()) {
    throw Error("reparameterize: size mismatch");
  }
  return mu + sigma.cwiseProduct(noise);
}

double kl_gauss(const Vector& mu, const Vector& sigma) {
  if (mu.size() != sigma.size()) throw Error("kl_gauss: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double s2 = sigma(i) * sigma(i);
    kl += mu(i) * mu(i) + s2 - 1.0 - std::log(s2);
  }
  return 0.5 * kl;
}

double loss(const VaeModel& model, const Vector& x, const Vector& noise) {
  if (noise.size() != model.arch.latent_dim) throw Error("loss: noise has the wrong dimension");
  Tape tape;
  const ModelVars v = register_model(tape, model);
  const Matrix xi = to_internal(x, model.arch).transpose();
  return batch_loss(tape, v, model, xi, noise.transpose()).scalar();
}

TrainResult train(const Dataset& data, const VaeArchitecture& arch, const TrainConfig& config) {
  arch.check();
  config.check();
  TrainResult result{VaeModel::init(arch, derive_seed(config.seed, 100)), {}};
  VaeModel& model = result.model;
  model.config = config;
  if (config.epochs == 0) return result;

  const Matrix x = internal_matrix(data, arch);
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw Error("cannot train on an empty dataset");

  std::vector<Matrix> params;
  for (auto* l : all_layers(model)) {
    params.push_back(l->weights);
    params.push_back(Matrix(l->biases));
  }
  std::vector<Matrix*> param_ptrs;
  for (auto& p : params) param_ptrs.push_back(&p);
  nn::OptimizerState opt(config.optimizer, config.learning_rate);

  auto write_back = [&] {
    auto layers = all_layers(model);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i]->weights = params[2 * i];
      layers[i]->biases = params[2 * i + 1].col(0);
    }
  };

  Rng rng(derive_seed(config.seed, 200));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const auto l = arch.latent_dim;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
      const std::size_t len = std::min(bs, n - start);
      Matrix xb(static_cast<Eigen::Index>(len), x.cols());
      for (std::size_t r = 0; r < len; ++r) xb.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(order[start + r]));
      Matrix noise(static_cast<Eigen::Index>(len), l);
      for (Eigen::Index r = 0; r < noise.rows(); ++r) {
        for (Eigen::Index c = 0; c < l; ++c) noise(r, c) = normal(rng);
      }

      Tape tape;
      write_back();
      const ModelVars vars = register_model(tape, model);
      Var total;
      try {
        total = batch_loss(tape, vars, model, xb, noise);
      } catch (const grad::NonFiniteError& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(batch_index + 1) + ": " + e.what());
      }
      const double batch_sum = total.scalar();
      Var mean_loss = grad::scale(total, 1.0 / static_cast<double>(len));
      tape.backward(mean_loss);
      epoch_sum += batch_sum;

      std::vector<Matrix> grads;
      for (const auto& var : flat_vars(vars)) grads.push_back(var.grad());
      nn::step(opt, param_ptrs, grads);
    }
    const double epoch_mean = epoch_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_mean)) {
      throw Error("training diverged: non-finite mean loss at epoch " + std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(epoch_mean);
  }
  write_back();
  return result;
}

std::string to_string(GenerationMode m) { return m == GenerationMode::prior ? "prior" : "posterior"; }

GenerationMode generation_mode_from_string(const std::string& s) {
  if (s == "prior") return GenerationMode::prior;
  if (s == "posterior") return GenerationMode::posterior;
  throw Error("unknown generation mode '" + s + "' (expected prior or posterior)");
}

Dataset generate_prior(const VaeModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(static_cast<Eigen::Index>(n), model.arch.latent_dim);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(i, c) = normal(rng);
  }
  return from_internal(sample_rows(model, z, rng), model.arch);
}

Dataset generate_posterior(const VaeModel& model, std::size_t n, const Dataset& data,
                           std::uint64_t seed) {
  if (data.rows() == 0) throw Error("posterior generation needs a non-empty dataset");
  const Matrix x = internal_matrix(data, model.arch);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix rows(static_cast<Eigen::Index>(n), x.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rows.row(i) = x.row(static_cast<Eigen::Index>(pick(rng)));
  const Matrix h = trunk_batch(model.encoder_trunk, rows);
  const Matrix mu = forward_batch(model.encoder_mu, h);
  const Matrix sd = (0.5 * forward_batch(model.encoder_logvar, h).array()).exp();
  Matrix z(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(i, c) = mu(i, c) + sd(i, c) * normal(rng);
  }
  return from_internal(sample_rows(model, z, rng), model.arch);
}

Dataset generate(const VaeModel& model, std::size_t n, GenerationMode mode, const Dataset* data,
                 std::uint64_t seed) {
  if (mode == GenerationMode::prior) return generate_prior(model, n, seed);
  if (!data) throw Error("posterior generation requires the (transformed) training data");
  return generate_posterior(model, n, *data, seed);
}

Dataset synthesize(const transform::TransformModel& tmodel, const VaeModel& vmodel, std::size_t n,
                   GenerationMode mode, std::uint64_t seed, const Dataset* original) {
  Dataset latent_space;
  if (mode == GenerationMode::prior) {
    latent_space = generate_prior(vmodel, n, seed);
  } else {
    if (!original) throw Error("posterior synthesis requires the original data");
    const Dataset transformed = transform::apply_forward(*original, tmodel);
    latent_space = generate_posterior(vmodel, n, transformed, seed);
  }
  return transform::apply_inverse(latent_space, tmodel);
}

// ---- serialization -------------------------------------------------------------

void to_json(nlohmann::json& j, const VaeArchitecture& a) {
  j = nlohmann::json{{"input_dim", a.input_dim()},
                     {"hidden_dim", a.hidden_dim},
                     {"latent_dim", a.latent_dim},
                     {"continuous_dim", a.continuous_dim()},
                     {"binary_dim", a.binary_dim()},
                     {"schema", a.schema},
                     {"continuous_columns", a.continuous_columns},
                     {"binary_columns", a.binary_columns}};
}

void from_json(const nlohmann::json& j, VaeArchitecture& a) {
  a.schema = j.at("schema").get<Schema>();
  a.hidden_dim = j.at("hidden_dim").get<Eigen::Index>();
  a.latent_dim = j.at("latent_dim").get<Eigen::Index>();
  a.continuous_columns = j.at("continuous_columns").get<std::vector<std::size_t>>();
  a.binary_columns = j.at("binary_columns").get<std::vector<std::size_t>>();
  a.check();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"seed", c.seed},
                     {"optimizer", nn::to_string(c.optimizer)}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.seed = j.value("seed", d.seed);
  c.optimizer = nn::optimizer_from_string(j.value("optimizer", nn::to_string(d.optimizer)));
  c.check();
}

void to_json(nlohmann::json& j, const VaeModel& m) {
  j = nlohmann::json{
      {"architecture", m.arch},
      {"encoder",
       {{"trunk", m.encoder_trunk}, {"mu", m.encoder_mu}, {"logvar", m.encoder_logvar}}},
      {"decoder",
       {{"trunk", m.decoder_trunk},
        {"mu", m.decoder_mu},
        {"logvar", m.decoder_logvar},
        {"logit", m.decoder_logit}}},
      {"train_config", m.config},
  };
}

void from_json(const nlohmann::json& j, VaeModel& m) {
  m.arch = j.at("architecture").get<VaeArchitecture>();
  const auto& e = j.at("encoder");
  m.encoder_trunk = e.at("trunk").get<nn::Mlp>();
  m.encoder_mu = e.at("mu").get<nn::DenseLayer>();
  m.encoder_logvar = e.at("logvar").get<nn::DenseLayer>();
  const auto& d = j.at("decoder");
  m.decoder_trunk = d.at("trunk").get<nn::Mlp>();
  m.decoder_mu = d.at("mu").get<nn::DenseLayer>();
  m.decoder_logvar = d.at("logvar").get<nn::DenseLayer>();
  m.decoder_logit = d.at("logit").get<nn::DenseLayer>();
  m.config = j.at("train_config").get<TrainConfig>();
  if (m.encoder_trunk.in_dim() != m.arch.input_dim() ||
      m.encoder_mu.out_dim() != m.arch.latent_dim ||
      m.decoder_mu.out_dim() != m.arch.continuous_dim() ||
      m.decoder_logit.out_dim() != m.arch.binary_dim()) {
    throw Error("VAE model json: layer shapes do not match the architecture");
  }
}

}  // namespace ptvae::vae
