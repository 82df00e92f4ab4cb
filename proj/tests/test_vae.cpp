#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "ptvae/simgen.hpp"
#include "ptvae/transform.hpp"
#include "ptvae/vae.hpp"

using namespace ptvae;
using namespace ptvae::vae;

namespace {

Schema mixed_schema() {
  return {{"c1", ColumnKind::continuous}, {"b1", ColumnKind::binary}, {"c2", ColumnKind::continuous}};
}

VaeModel zero_model(const Schema& s, std::uint64_t seed = 1) {
  auto m = VaeModel::init(make_architecture(s), seed);
  m.zero_heads();
  return m;
}

Dataset toy(std::size_t n, std::uint64_t seed) {
  auto c = testing::normal_sample(n, 0, 0.5, seed);
  Rng rng(seed + 1);
  std::bernoulli_distribution b(0.3);
  std::vector<double> bin(n);
  for (auto& v : bin) v = b(rng) ? 1.0 : 0.0;
  return Dataset({{"x", ColumnKind::continuous}, {"b", ColumnKind::binary}}, {c, bin});
}

}  // namespace

TEST_CASE("architecture follows the schema") {
  const auto a = make_architecture(mixed_schema());
  CHECK(a.input_dim() == 3);
  CHECK(a.hidden_dim == 3);
  CHECK(a.latent_dim == 3);
  CHECK(a.continuous_dim() == 2);
  CHECK(a.binary_dim() == 1);
  CHECK_THROWS_AS(make_architecture(mixed_schema(), 4, 0), Error);
}

TEST_CASE("zero heads give the standard prior and neutral decoder") {
  const auto m = zero_model(mixed_schema());
  Vector x(3);
  x << 0.3, 1.0, -2.0;
  const auto e = encode(m, x);
  CHECK(e.mu.norm() == 0.0);
  CHECK((e.sigma.array() == 1.0).all());
  const auto d = decode(m, Vector::Constant(3, 0.7));
  CHECK(d.mu.norm() == 0.0);
  CHECK((d.sigma.array() == 1.0).all());
  CHECK(d.pi(0) == 0.5);
  const auto e2 = encode(m, x);
  CHECK(e2.mu == e.mu);
}

TEST_CASE("reparameterization") {
  Vector mu(2), sigma(2), noise(2);
  mu << 1.0, -2.0;
  sigma << 0.5, 3.0;
  noise << 0.3, -1.1;
  CHECK(reparameterize(mu, sigma, Vector::Zero(2)) == mu);
  CHECK(reparameterize(Vector::Zero(2), Vector::Ones(2), noise) == noise);

  Rng rng(4);
  std::normal_distribution<double> nd;
  std::vector<double> draws(100000);
  for (auto& v : draws) {
    Vector e(1);
    e << nd(rng);
    v = reparameterize(Vector::Constant(1, 2.0), Vector::Constant(1, 0.7), e)(0);
  }
  CHECK(std::abs(sd(draws) / 0.7 - 1.0) < 0.02);
}

TEST_CASE("kl divergence closed form") {
  CHECK(kl_gauss(Vector::Zero(3), Vector::Ones(3)) == 0.0);
  CHECK(kl_gauss(Vector::Ones(1), Vector::Ones(1)) == 0.5);
  CHECK(kl_gauss(Vector::Zero(1), Vector::Constant(1, 2.0)) ==
        doctest::Approx(0.5 * (4.0 - 1.0 - 2.0 * std::log(2.0))));
  CHECK(kl_gauss(Vector::Zero(1), Vector::Constant(1, 2.0)) == doctest::Approx(0.8069).epsilon(1e-4));
}

TEST_CASE("decoder outputs stay in range for random parameters") {
  Rng rng(12);
  std::normal_distribution<double> nd(0.0, 3.0);
  const auto arch = make_architecture(mixed_schema(), 5, 2);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto m = VaeModel::init(arch, static_cast<std::uint64_t>(trial % 50));
    Vector z(2);
    z << nd(rng), nd(rng);
    const auto d = decode(m, z);
    CHECK_MESSAGE((d.sigma.array() > 0.0).all(), "trial " << trial);
    CHECK_MESSAGE((d.pi.array() > 0.0 && d.pi.array() < 1.0).all(), "trial " << trial);
  }
}

TEST_CASE("loss terms at neutral parameters") {
  const auto m = zero_model(mixed_schema());
  Vector x(3);
  x << 0.0, 1.0, 0.0;
  // two unit-variance Gaussians at their mean, one Bernoulli at 1/2, zero KL
  const double expected = std::log(2.0 * std::numbers::pi) + std::log(2.0);
  CHECK(loss(m, x, Vector::Constant(3, 0.4)) == doctest::Approx(expected).epsilon(1e-12));
  Vector x0 = x;
  x0(1) = 0.0;
  CHECK(loss(m, x0, Vector::Zero(3)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("expected loss of a matched Gaussian decoder is its entropy") {
  Schema s{{"x", ColumnKind::continuous}};
  auto m = zero_model(s);
  const double sigma = 0.6;
  m.decoder_logvar.biases(0) = std::log(sigma * sigma);
  const auto x = testing::normal_sample(200000, 0, sigma, 5);
  double total = 0.0;
  for (double v : x) total += loss(m, Vector::Constant(1, v), Vector::Zero(3));
  const double entropy = 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) + 0.5;
  CHECK(std::abs(total / static_cast<double>(x.size()) - entropy) < 0.01);
}

TEST_CASE("zero epochs returns the initial model") {
  const auto data = toy(100, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  const auto arch = make_architecture(data.schema());
  const auto r = train(data, arch, cfg);
  const auto init = VaeModel::init(arch, derive_seed(9, 100));
  CHECK(r.model.encoder_trunk.layers[0].weights == init.encoder_trunk.layers[0].weights);
  CHECK(r.model.decoder_logit.weights == init.decoder_logit.weights);
  CHECK(r.loss_trace.empty());
}

TEST_CASE("training lowers the loss on a 1-d Gaussian") {
  Dataset d({{"x", ColumnKind::continuous}}, {testing::normal_sample(1000, 0, 0.5, 3)});
  const auto r = train(d, make_architecture(d.schema()), TrainConfig{});
  REQUIRE(r.loss_trace.size() == 100);
  CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("training is deterministic and pulls posterior means toward zero") {
  const auto data = toy(1000, 7);
  TrainConfig cfg;
  cfg.epochs = 30;
  const auto arch = make_architecture(data.schema());
  const auto a = train(data, arch, cfg);
  const auto b = train(data, arch, cfg);
  CHECK(nlohmann::json(a.model).dump() == nlohmann::json(b.model).dump());
  CHECK(a.loss_trace == b.loss_trace);

  Vector mean_mu = Vector::Zero(3);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    Vector x(2);
    x << data.at(i, 0), data.at(i, 1);
    mean_mu += encode(a.model, x).mu;
  }
  mean_mu /= static_cast<double>(data.rows());
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(mean_mu(k)) < 0.3);
}

TEST_CASE("full-size network trains to completion") {
  auto sc = sim::default_config();
  const auto data = sim::generate_benchmark(sc);
  const auto z = transform::apply_forward(data, transform::fit_standardize_only(data));
  const auto arch = make_architecture(z.schema());
  CHECK(arch.input_dim() == 21);
  CHECK(arch.hidden_dim == 21);
  const auto r = train(z, arch, TrainConfig{});
  CHECK(r.loss_trace.size() == 100);
  for (double v : r.loss_trace) CHECK(std::isfinite(v));
}

TEST_CASE("prior generation from a neutral model") {
  const auto m = zero_model(mixed_schema());
  const auto empty = generate_prior(m, 0, 1);
  CHECK(empty.rows() == 0);
  CHECK(empty.schema() == mixed_schema());

  const auto g = generate_prior(m, 20000, 2);
  CHECK(std::abs(mean(g.column(0))) < 0.05);
  CHECK(std::abs(mean(g.column(2))) < 0.05);
  CHECK(std::abs(mean(g.column(1)) - 0.5) < 0.02);
  for (double v : g.column(1)) CHECK((v == 0.0 || v == 1.0));

  const auto g2 = generate_prior(m, 20000, 2);
  CHECK(g == g2);
}

TEST_CASE("posterior generation and synthesis keep the schema") {
  Schema s{{"k", ColumnKind::integer_continuous}, {"b", ColumnKind::binary}};
  std::vector<double> k, b;
  Rng rng(3);
  std::poisson_distribution<int> pd(20);
  for (int i = 0; i < 300; ++i) {
    k.push_back(pd(rng));
    b.push_back(i % 3 == 0);
  }
  Dataset data(s, {k, b});
  transform::TransformConfig tc;
  tc.power.outer_rounds = 1;
  const auto tm = transform::fit_transform_model(data, tc);
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto vm = train(transform::apply_forward(data, tm), make_architecture(s), cfg).model;
  for (auto mode : {GenerationMode::prior, GenerationMode::posterior}) {
    const auto syn = synthesize(tm, vm, 123, mode, 4, &data);
    CHECK(syn.rows() == 123);
    CHECK(syn.schema() == s);
    CHECK_NOTHROW(syn.validate());
    for (double v : syn.column(0)) CHECK(v == std::round(v));
  }
  CHECK_THROWS_AS(synthesize(tm, vm, 10, GenerationMode::posterior, 4, nullptr), Error);
  CHECK(generation_mode_from_string("posterior") == GenerationMode::posterior);
  CHECK_THROWS_AS(generation_mode_from_string("both"), Error);
}

TEST_CASE("model json round trip preserves outputs") {
  const auto data = toy(200, 11);
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto m = train(data, make_architecture(data.schema()), cfg).model;
  const auto back = nlohmann::json::parse(nlohmann::json(m).dump()).get<VaeModel>();
  CHECK(generate_prior(back, 50, 1) == generate_prior(m, 50, 1));
}
