#pragma once

// Variational autoencoder for mixed continuous/binary rows.
//
// Encoder: x -> tanh hidden -> (mu_z, log sigma_z^2).
// Decoder: z -> tanh trunk f -> Gaussian heads (mu_x, log sigma_x^2) for the
// continuous block and Bernoulli logits for the binary block.
//
// Internally rows are laid out continuous-block-then-binary-block; the public
// API always takes and returns columns in schema order.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ptvae/data.hpp"
#include "ptvae/nn.hpp"

namespace ptvae::transform {
struct TransformModel;
}

namespace ptvae::vae {

using Vector = Eigen::VectorXd;
using grad::Matrix;

struct VaeArchitecture {
  Schema schema;
  Eigen::Index hidden_dim = 0;
  Eigen::Index latent_dim = 3;
  /// schema indices of the continuous (incl. integer) and binary columns
  std::vector<std::size_t> continuous_columns;
  std::vector<std::size_t> binary_columns;

  Eigen::Index input_dim() const { return static_cast<Eigen::Index>(schema.size()); }
  Eigen::Index continuous_dim() const { return static_cast<Eigen::Index>(continuous_columns.size()); }
  Eigen::Index binary_dim() const { return static_cast<Eigen::Index>(binary_columns.size()); }
  void check() const;
};

/// hidden_dim = 0 means "same as the number of input columns".
VaeArchitecture make_architecture(const Schema& schema, Eigen::Index hidden_dim = 0,
                                  Eigen::Index latent_dim = 3);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 50;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;

  void check() const;
};

struct VaeModel {
  VaeArchitecture arch;
  nn::Mlp encoder_trunk;
  nn::DenseLayer encoder_mu;
  nn::DenseLayer encoder_logvar;
  nn::Mlp decoder_trunk;
  nn::DenseLayer decoder_mu;
  nn::DenseLayer decoder_logvar;
  nn::DenseLayer decoder_logit;
  TrainConfig config;

  /// Glorot-initialised weights, zero biases.
  static VaeModel init(const VaeArchitecture& arch, std::uint64_t seed);
  /// Set every head's weights and biases to zero.
  void zero_heads();
};

struct Encoding {
  Vector mu;
  Vector sigma;
};

struct Decoding {
  Vector mu;     // continuous block
  Vector sigma;  // continuous block
  Vector pi;     // binary block
};

/// x in schema order.
Encoding encode(const VaeModel& model, const Vector& x);
Decoding decode(const VaeModel& model, const Vector& z);
/// z = mu + sigma * noise
Vector reparameterize(const Vector& mu, const Vector& sigma, const Vector& noise);
/// KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - ln sigma^2)
double kl_gauss(const Vector& mu, const Vector& sigma);

/// Per-datum negative ELBO with one latent draw z = mu + sigma * noise.
double loss(const VaeModel& model, const Vector& x, const Vector& noise);

/// Probabilities are clamped to [kPiClamp, 1 - kPiClamp] before taking logs.
inline constexpr double kPiClamp = 1e-7;

struct TrainResult {
  VaeModel model;
  /// mean per-datum loss of each epoch
  std::vector<double> loss_trace;
};

/// Mini-batch training on data already in transformed space. Deterministic in
/// config.seed.
TrainResult train(const Dataset& data, const VaeArchitecture& arch, const TrainConfig& config);

enum class GenerationMode { prior, posterior };

std::string to_string(GenerationMode m);
GenerationMode generation_mode_from_string(const std::string& s);

/// Samples with z ~ N(0, I). Uses only model parameters.
Dataset generate_prior(const VaeModel& model, std::size_t n, std::uint64_t seed);
/// Samples with z ~ q(z | x) for rows x drawn with replacement from `data`.
Dataset generate_posterior(const VaeModel& model, std::size_t n, const Dataset& data,
                           std::uint64_t seed);
Dataset generate(const VaeModel& model, std::size_t n, GenerationMode mode,
                 const Dataset* data, std::uint64_t seed);

/// Generate in transformed space, then map back through the transform model
/// (integer columns rounded). `original` is required for posterior mode only.
Dataset synthesize(const transform::TransformModel& tmodel, const VaeModel& vmodel, std::size_t n,
                   GenerationMode mode, std::uint64_t seed, const Dataset* original = nullptr);

void to_json(nlohmann::json& j, const VaeArchitecture& a);
void from_json(const nlohmann::json& j, VaeArchitecture& a);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const VaeModel& m);
void from_json(const nlohmann::json& j, VaeModel& m);

}  // namespace ptvae::vae
