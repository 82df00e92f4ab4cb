#pragma once

// Per-variable pre-transformations: a shifted Box-Cox transform for skewness,
// followed by a signed power transform that flattens bimodal shapes. Both are
// exactly invertible so VAE output can be mapped back to the data scale.

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptvae/data.hpp"
#include "ptvae/grad.hpp"
#include "ptvae/nn.hpp"

namespace ptvae::transform {

struct BoxCoxParams {
  double lambda1 = 1.0;
  /// shift that makes the data positive
  double lambda2 = 0.0;

  bool operator==(const BoxCoxParams&) const = default;
};

/// s = beta1 (alpha - x) below alpha, beta2 (x - alpha) above; t = sgn(s)|s|^rho.
/// Requires beta1 < 0 < beta2 and rho > 0, which makes the map strictly increasing.
struct PowerParams {
  double alpha = 0.0;
  double beta1 = -1.0;
  double beta2 = 1.0;
  double rho = 1.0;

  void check() const;
  bool operator==(const PowerParams&) const = default;
};

struct ColumnTransform {
  BoxCoxParams boxcox;
  ScalingParams scale_a;
  PowerParams power;
  ScalingParams scale_b;

  bool operator==(const ColumnTransform&) const = default;
};

enum class TransformMode {
  /// Box-Cox, scale, power, scale.
  full,
  /// Only the final scaling; the plain-VAE baseline.
  standardize_only,
};

struct TransformModel {
  TransformMode mode = TransformMode::full;
  /// Continuous and integer columns in schema order.
  std::vector<std::pair<std::string, ColumnTransform>> columns;

  const ColumnTransform* find(const std::string& name) const;
  bool operator==(const TransformModel&) const = default;
};

// ---- Box-Cox -----------------------------------------------------------------

std::vector<double> boxcox_forward(std::span<const double> y, const BoxCoxParams& p);
/// Where lambda1 t + 1 < 0 the value is truncated to the domain boundary.
std::vector<double> boxcox_inverse(std::span<const double> t, const BoxCoxParams& p);

/// 0 when the data already clear a margin of 0.01 sd above zero, otherwise the
/// shift that lifts the minimum to that margin.
double fit_lambda2(std::span<const double> y);

/// Profile log-likelihood -(n/2) ln var(t) + (lambda - 1) sum ln(y + lambda2).
double boxcox_log_likelihood(std::span<const double> y, double lambda1, double lambda2);

struct Lambda1Config {
  double learning_rate = 0.05;
  int max_iterations = 2000;
  /// converged once the step size decays below this
  double tolerance = 1e-7;
  /// or once |d loglik / d lambda| per observation drops below this
  double gradient_tolerance = 1e-7;
};

struct Lambda1Fit {
  double lambda1 = 1.0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Gradient ascent on the profile log-likelihood starting from lambda = 1.
Lambda1Fit fit_lambda1(std::span<const double> y, double lambda2, const Lambda1Config& config = {});

/// Value and d/dlambda of the per-observation profile log-likelihood.
std::pair<double, double> boxcox_loglik_and_gradient(std::span<const double> y, double lambda1,
                                                     double lambda2);

// ---- power transform ---------------------------------------------------------

std::vector<double> power_forward(std::span<const double> x, const PowerParams& p);
std::vector<double> power_inverse(std::span<const double> t, const PowerParams& p);

/// Tape version with the four parameters as 1x1 Vars.
struct PowerVars {
  grad::Var alpha, beta1, beta2, rho;
};
grad::Var power_forward(const grad::Var& x, const PowerVars& p);

/// |Q84 - M - s| + |M - Q16 - s| + |Q16 - Q02 - s| + |Q98 - Q84 - s|, s the sd.
double two_sigma_criterion(std::span<const double> x);
grad::Var two_sigma_criterion(const grad::Var& x);

/// (skewness^2 + 1) / kurtosis. Throws on zero variance.
double bimodality_coefficient(std::span<const double> x);

/// Shape diagnostics for comparing power-transform objectives.
struct ShapeDiagnostics {
  double two_sigma = 0.0;
  double bimodality = 0.0;
  /// Gaussian log-likelihood at the MLE: -n/2 (ln(2 pi var) + 1).
  double normal_loglik = 0.0;
};
ShapeDiagnostics shape_diagnostics(std::span<const double> x);

/// Value and gradient of two_sigma_criterion(power_forward(x, p)) with respect to
/// (alpha, rho, beta1, beta2).
struct PowerObjective {
  double value = 0.0;
  std::array<double, 4> gradient{};
};
PowerObjective power_objective(std::span<const double> sorted_x, const PowerParams& p);
/// Same quantity evaluated by reverse-mode differentiation on a tape.
PowerObjective power_objective_tape(std::span<const double> sorted_x, const PowerParams& p);

struct PowerFitConfig {
  int outer_rounds = 10;
  int epochs = 100;
  double learning_rate = 0.01;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  /// |beta1|, beta2 and rho are kept at or above this after every update
  double min_magnitude = 1e-3;
};

struct PowerFit {
  PowerParams params;
  double criterion = 0.0;
  double initial_criterion = 0.0;
};

/// Coordinate descent on the 2-sigma criterion: each outer round runs `epochs`
/// steps on alpha, then rho, then beta1, then beta2. Returns the best iterate.
PowerFit fit_power_params(std::span<const double> x, const PowerFitConfig& config = {});

// ---- whole-dataset pipeline --------------------------------------------------

struct TransformConfig {
  Lambda1Config lambda1;
  PowerFitConfig power;
};

ColumnTransform fit_column(std::span<const double> y, const TransformConfig& config = {});
std::vector<double> column_forward(std::span<const double> y, const ColumnTransform& ct,
                                   TransformMode mode = TransformMode::full);
std::vector<double> column_inverse(std::span<const double> t, const ColumnTransform& ct,
                                   TransformMode mode = TransformMode::full);

TransformModel fit_transform_model(const Dataset& data, const TransformConfig& config = {});
/// Baseline model: each non-binary column only centred and scaled.
TransformModel fit_standardize_only(const Dataset& data);

Dataset apply_forward(const Dataset& data, const TransformModel& model);
/// Reverse of apply_forward; integer columns are rounded at the end.
Dataset apply_inverse(const Dataset& data, const TransformModel& model);

void to_json(nlohmann::json& j, const TransformModel& m);
void from_json(const nlohmann::json& j, TransformModel& m);

}  // namespace ptvae::transform
