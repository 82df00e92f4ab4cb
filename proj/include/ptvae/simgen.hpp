#pragma once

// Mixed-type benchmark generator. Latent rows are multivariate normal with a
// given correlation matrix (Gaussian copula); each coordinate is then mapped
// through its own marginal. An optional bimodal column is drawn from one of
// two normals depending on a binary driver column.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ptvae/data.hpp"

namespace ptvae::sim {

enum class MarginalKind { binary, lognormal, gaussian };

std::string to_string(MarginalKind kind);
MarginalKind marginal_kind_from_string(const std::string& s);

struct MarginalSpec {
  std::string name;
  MarginalKind kind = MarginalKind::gaussian;
  double prevalence = 0.5;  // binary
  double mu = 0.0;          // gaussian mean, or mean of log for lognormal
  double sigma = 1.0;       // gaussian sd, or sd of log for lognormal
  bool integer = false;     // round to the nearest integer
};

struct BimodalSpec {
  std::string name = "bimodal";
  std::string driver;
  double mean0 = 0.0;
  double sd0 = 1.0;
  double mean1 = 4.0;
  double sd1 = 1.0;
};

struct SimConfig {
  std::size_t n = 2500;
  Eigen::MatrixXd correlation;
  std::vector<MarginalSpec> columns;
  std::optional<BimodalSpec> bimodal;
  std::uint64_t seed = 1;

  /// Throws Error on an invalid config. Positive-definiteness is checked by
  /// generate_benchmark().
  void check() const;
  Schema schema() const;
};

/// 21 columns: 12 binary (one designated "treatment"), 8 correlated
/// continuous columns with slight and severe skew, and a bimodal column
/// driven by treatment.
SimConfig default_config();

/// Correlation matrix with entries rho^|i-j|; positive definite for |rho| < 1.
Eigen::MatrixXd ar1_correlation(std::size_t dim, double rho);

Dataset generate_benchmark(const SimConfig& config);

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace ptvae::sim
