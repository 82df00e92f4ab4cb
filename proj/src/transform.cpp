#include "ptvae/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ptvae::transform {

using grad::Matrix;
using grad::Tape;
using grad::Var;

void PowerParams::check() const {
  if (!(beta1 < 0.0) || !(beta2 > 0.0) || !(rho > 0.0)) {
    throw Error("power params require beta1 < 0 < beta2 and rho > 0 (got beta1=" +
                format_double(beta1) + ", beta2=" + format_double(beta2) +
                ", rho=" + format_double(rho) + ")");
  }
}

const ColumnTransform* TransformModel::find(const std::string& name) const {
  for (const auto& [n, ct] : columns) {
    if (n == name) return &ct;
  }
  return nullptr;
}

// ---- Box-Cox -----------------------------------------------------------------

std::vector<double> boxcox_forward(std::span<const double> y, const BoxCoxParams& p) {
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y[i] + p.lambda2;
    if (!(v > 0.0)) {
      throw Error("boxcox_forward: y + lambda2 = " + format_double(v) + " is not positive at index " +
                  std::to_string(i));
    }
    t[i] = p.lambda1 == 0.0 ? std::log(v) : std::expm1(p.lambda1 * std::log(v)) / p.lambda1;
  }
  return t;
}

std::vector<double> boxcox_inverse(std::span<const double> t, const BoxCoxParams& p) {
  std::vector<double> y(t.size());
  // For lambda1 <= 0 the domain boundary lies at +infinity on the data
  // scale; cap it at a large finite value instead.
  const double cap = std::numeric_limits<double>::max() / 2.0;
  if (p.lambda1 == 0.0) {
    for (std::size_t i = 0; i < t.size(); ++i) y[i] = std::min(std::exp(t[i]), cap) - p.lambda2;
    return y;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    double base = p.lambda1 * t[i] + 1.0;
    if (base < 0.0) base = 0.0;
    double v = std::pow(base, 1.0 / p.lambda1);
    if (!(v <= cap)) v = cap;
    y[i] = v - p.lambda2;
  }
  return y;
}

double fit_lambda2(std::span<const double> y) {
  const double delta = 0.01 * sd(y);
  const double lo = *std::min_element(y.begin(), y.end());
  return lo > delta ? 0.0 : delta - lo;
}

namespace {

Eigen::VectorXd shifted_vector(std::span<const double> y, double lambda2) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = y[i] + lambda2;
    if (!(v(static_cast<Eigen::Index>(i)) > 0.0)) {
      throw Error("Box-Cox: y + lambda2 is not positive at index " + std::to_string(i));
    }
  }
  return v;
}

}  // namespace

double boxcox_log_likelihood(std::span<const double> y, double lambda1, double lambda2) {
  const auto t = boxcox_forward(y, {lambda1, lambda2});
  const double s = sd(t);
  double log_sum = 0.0;
  for (double v : y) log_sum += std::log(v + lambda2);
  const double n = static_cast<double>(y.size());
  return -0.5 * n * std::log(s * s) + (lambda1 - 1.0) * log_sum;
}

std::pair<double, double> boxcox_loglik_and_gradient(std::span<const double> y, double lambda1,
                                                     double lambda2) {
  const Eigen::VectorXd shifted = shifted_vector(y, lambda2);
  const double mean_log = shifted.array().log().mean();
  Tape tape;
  Var lam = tape.variable(lambda1);
  Var t = grad::boxcox(shifted, lam);
  Var ll = grad::scale(grad::log(grad::variance(t)), -0.5) +
           grad::scale(grad::add_scalar(lam, -1.0), mean_log);
  tape.backward(ll);
  return {ll.scalar(), lam.grad()(0, 0)};
}

Lambda1Fit fit_lambda1(std::span<const double> y, double lambda2, const Lambda1Config& config) {
  if (y.size() < 2) throw Error("fit_lambda1 needs at least two values");
  const double n = static_cast<double>(y.size());
  nn::OptimizerState opt(nn::OptimizerKind::adam, config.learning_rate);

  Lambda1Fit best;
  double lambda = 1.0;
  double prev_grad = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const auto [ll, g] = boxcox_loglik_and_gradient(y, lambda, lambda2);
    if (ll > best_ll) {
      best_ll = ll;
      best.lambda1 = lambda;
    }
    // Halve the step whenever the ascent overshoots the maximum.
    if (it > 0 && g * prev_grad < 0.0) opt.learning_rate *= 0.5;
    if (opt.learning_rate < config.tolerance || std::abs(g) < config.gradient_tolerance) {
      best.converged = true;
      break;
    }
    prev_grad = g;
    lambda = nn::step_scalar(opt, lambda, -g);
  }
  best.iterations = it;
  best.log_likelihood = best_ll * n;
  return best;
}

// ---- power transform ---------------------------------------------------------

std::vector<double> power_forward(std::span<const double> x, const PowerParams& p) {
  p.check();
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = x[i] < p.alpha ? p.beta1 * (p.alpha - x[i]) : p.beta2 * (x[i] - p.alpha);
    t[i] = s == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(s), p.rho), s);
  }
  return t;
}

std::vector<double> power_inverse(std::span<const double> t, const PowerParams& p) {
  p.check();
  std::vector<double> x(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double s = t[i] == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(t[i]), 1.0 / p.rho), t[i]);
    x[i] = s < 0.0 ? p.alpha - s / p.beta1 : p.alpha + s / p.beta2;
  }
  return x;
}

Var power_forward(const Var& x, const PowerVars& p) {
  Var d = x - p.alpha;
  Var s = grad::scale(p.beta1 * grad::neg_part(d), -1.0) + p.beta2 * grad::relu(d);
  return grad::signed_pow(s, p.rho);
}

double two_sigma_criterion(std::span<const double> x) {
  if (x.empty()) throw Error("two_sigma_criterion of empty vector");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double s = sd(sorted);
  const double q02 = quantile_sorted(sorted, 0.02);
  const double q16 = quantile_sorted(sorted, 0.16);
  const double med = quantile_sorted(sorted, 0.5);
  const double q84 = quantile_sorted(sorted, 0.84);
  const double q98 = quantile_sorted(sorted, 0.98);
  return std::abs(q84 - med - s) + std::abs(med - q16 - s) + std::abs(q16 - q02 - s) +
         std::abs(q98 - q84 - s);
}

Var two_sigma_criterion(const Var& x) {
  Var s = grad::stddev(x);
  Var q02 = grad::quantile(x, 0.02);
  Var q16 = grad::quantile(x, 0.16);
  Var med = grad::quantile(x, 0.5);
  Var q84 = grad::quantile(x, 0.84);
  Var q98 = grad::quantile(x, 0.98);
  return grad::abs(q84 - med - s) + grad::abs(med - q16 - s) + grad::abs(q16 - q02 - s) +
         grad::abs(q98 - q84 - s);
}

double bimodality_coefficient(std::span<const double> x) {
  const auto st = column_stats(x);
  if (!st.skewness || !st.kurtosis) throw Error("bimodality coefficient undefined for zero variance");
  return (*st.skewness * *st.skewness + 1.0) / *st.kurtosis;
}

ShapeDiagnostics shape_diagnostics(std::span<const double> x) {
  ShapeDiagnostics d;
  d.two_sigma = two_sigma_criterion(x);
  d.bimodality = bimodality_coefficient(x);
  const double s = sd(x);
  const double n = static_cast<double>(x.size());
  d.normal_loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * s * s) + 1.0);
  return d;
}

namespace {

// Parameter order used throughout the fitter: alpha, rho, beta1, beta2.
constexpr std::size_t kAlpha = 0, kRho = 1, kBeta1 = 2, kBeta2 = 3;

double& param_ref(PowerParams& p, std::size_t which) {
  switch (which) {
    case kAlpha: return p.alpha;
    case kRho: return p.rho;
    case kBeta1: return p.beta1;
    default: return p.beta2;
  }
}

PowerObjective objective_impl(const Matrix& sorted_x, const PowerParams& p,
                              std::array<bool, 4> active) {
  Tape tape;
  auto leaf = [&](double v, bool a) { return a ? tape.variable(v) : tape.constant(v); };
  PowerVars vars{leaf(p.alpha, active[kAlpha]), leaf(p.beta1, active[kBeta1]),
                 leaf(p.beta2, active[kBeta2]), leaf(p.rho, active[kRho])};
  Var x = tape.constant(sorted_x);
  Var crit = two_sigma_criterion(power_forward(x, vars));
  tape.backward(crit);
  PowerObjective out;
  out.value = crit.scalar();
  auto g = [](const Var& v, bool a) { return a ? v.grad()(0, 0) : 0.0; };
  out.gradient = {g(vars.alpha, active[kAlpha]), g(vars.rho, active[kRho]),
                  g(vars.beta1, active[kBeta1]), g(vars.beta2, active[kBeta2])};
  return out;
}

// Closed-form value and gradient of the criterion for sorted input; matches
// objective_impl but avoids building a tape on every step.
PowerObjective fast_objective(const Matrix& sorted_x, const PowerParams& p) {
  const auto n = static_cast<std::size_t>(sorted_x.size());
  const double* x = sorted_x.data();
  std::vector<double> t(n);
  std::array<std::vector<double>, 4> dt;
  for (auto& v : dt) v.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool below = x[i] < p.alpha;
    const double s = below ? p.beta1 * (p.alpha - x[i]) : p.beta2 * (x[i] - p.alpha);
    if (s == 0.0) continue;
    const double ls = std::log(std::abs(s));
    const double mag = std::exp(p.rho * ls);
    t[i] = std::copysign(mag, s);
    const double dtds = p.rho * mag / std::abs(s);
    dt[kRho][i] = t[i] * ls;
    if (below) {
      dt[kAlpha][i] = dtds * p.beta1;
      dt[kBeta1][i] = dtds * (p.alpha - x[i]);
    } else {
      dt[kAlpha][i] = -dtds * p.beta2;
      dt[kBeta2][i] = dtds * (x[i] - p.alpha);
    }
  }
  const double dn = static_cast<double>(n);
  double m = 0.0;
  for (double v : t) m += v;
  m /= dn;
  double var = 0.0;
  for (double v : t) var += (v - m) * (v - m);
  const double sigma = std::sqrt(var / dn);

  struct Q {
    std::size_t lo, hi;
    double f;
  };
  auto locate = [&](double q) {
    const double pos = (dn - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    return Q{lo, std::min(lo + 1, n - 1), pos - std::floor(pos)};
  };
  const std::array<Q, 5> qs{locate(0.02), locate(0.16), locate(0.5), locate(0.84), locate(0.98)};
  auto qval = [&](const Q& q, const std::vector<double>& v) { return v[q.lo] + q.f * (v[q.hi] - v[q.lo]); };
  // gaps: Q84 - M, M - Q16, Q16 - Q02, Q98 - Q84
  const std::array<std::pair<int, int>, 4> gaps{{{3, 2}, {2, 1}, {1, 0}, {4, 3}}};

  PowerObjective out;
  std::array<double, 4> sign{};
  for (std::size_t k = 0; k < 4; ++k) {
    const double g = qval(qs[gaps[k].first], t) - qval(qs[gaps[k].second], t) - sigma;
    out.value += std::abs(g);
    sign[k] = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
  }
  for (std::size_t j = 0; j < 4; ++j) {
    const auto& d = dt[j];
    double dsigma = 0.0;
    if (sigma > 0.0) {
      for (std::size_t i = 0; i < n; ++i) dsigma += (t[i] - m) * d[i];
      dsigma /= dn * sigma;
    }
    double grad = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      grad += sign[k] * (qval(qs[gaps[k].first], d) - qval(qs[gaps[k].second], d) - dsigma);
    }
    out.gradient[j] = grad;
  }
  return out;
}

Matrix sorted_column(std::span<const double> x) {
  Matrix m(static_cast<Eigen::Index>(x.size()), 1);
  std::copy(x.begin(), x.end(), m.data());
  std::sort(m.data(), m.data() + m.size());
  return m;
}

void project(PowerParams& p, double eps) {
  p.beta1 = std::min(p.beta1, -eps);
  p.beta2 = std::max(p.beta2, eps);
  p.rho = std::max(p.rho, eps);
}

}  // namespace

PowerObjective power_objective(std::span<const double> sorted_x, const PowerParams& p) {
  p.check();
  return fast_objective(sorted_column(sorted_x), p);
}

PowerObjective power_objective_tape(std::span<const double> sorted_x, const PowerParams& p) {
  p.check();
  return objective_impl(sorted_column(sorted_x), p, {true, true, true, true});
}

PowerFit fit_power_params(std::span<const double> x, const PowerFitConfig& config) {
  if (x.size() < 4) throw Error("fit_power_params needs at least 4 values");
  // The criterion ignores order and the map is increasing, so sorting once lets
  // every quantile be read off by position.
  const Matrix sorted = sorted_column(x);

  PowerParams p;
  PowerFit fit;
  fit.params = p;
  fit.initial_criterion = fast_objective(sorted, p).value;
  fit.criterion = fit.initial_criterion;

  std::array<nn::OptimizerState, 4> opt;
  for (auto& o : opt) o = nn::OptimizerState(config.optimizer, config.learning_rate);

  auto consider = [&](double value, const PowerParams& at) {
    if (value < fit.criterion) {
      fit.criterion = value;
      fit.params = at;
    }
  };

  for (int round = 0; round < config.outer_rounds; ++round) {
    for (std::size_t which : {kAlpha, kRho, kBeta1, kBeta2}) {
      for (int e = 0; e < config.epochs; ++e) {
        const auto obj = fast_objective(sorted, p);
        consider(obj.value, p);
        double& v = param_ref(p, which);
        v = nn::step_scalar(opt[which], v, obj.gradient[which]);
        project(p, config.min_magnitude);
      }
    }
  }
  consider(fast_objective(sorted, p).value, p);
  return fit;
}

// ---- whole-dataset pipeline --------------------------------------------------

ColumnTransform fit_column(std::span<const double> y, const TransformConfig& config) {
  ColumnTransform ct;
  ct.boxcox.lambda2 = fit_lambda2(y);
  ct.boxcox.lambda1 = fit_lambda1(y, ct.boxcox.lambda2, config.lambda1).lambda1;
  const auto bc = boxcox_forward(y, ct.boxcox);
  auto a = standardize(bc);
  ct.scale_a = a.params;
  ct.power = fit_power_params(a.scaled, config.power).params;
  const auto pw = power_forward(a.scaled, ct.power);
  ct.scale_b = standardize(pw).params;
  return ct;
}

std::vector<double> column_forward(std::span<const double> y, const ColumnTransform& ct,
                                   TransformMode mode) {
  if (mode == TransformMode::standardize_only) return apply_scaling(y, ct.scale_b);
  const auto bc = boxcox_forward(y, ct.boxcox);
  const auto a = apply_scaling(bc, ct.scale_a);
  const auto pw = power_forward(a, ct.power);
  return apply_scaling(pw, ct.scale_b);
}

std::vector<double> column_inverse(std::span<const double> t, const ColumnTransform& ct,
                                   TransformMode mode) {
  if (mode == TransformMode::standardize_only) return destandardize(t, ct.scale_b);
  const auto b = destandardize(t, ct.scale_b);
  const auto pw = power_inverse(b, ct.power);
  const auto a = destandardize(pw, ct.scale_a);
  return boxcox_inverse(a, ct.boxcox);
}

TransformModel fit_transform_model(const Dataset& data, const TransformConfig& config) {
  TransformModel model;
  model.mode = TransformMode::full;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto& spec = data.schema()[j];
    if (spec.kind == ColumnKind::binary) continue;
    try {
      model.columns.emplace_back(spec.name, fit_column(data.column(j), config));
    } catch (const Error& e) {
      throw Error("column '" + spec.name + "': " + e.what());
    }
  }
  return model;
}

TransformModel fit_standardize_only(const Dataset& data) {
  TransformModel model;
  model.mode = TransformMode::standardize_only;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto& spec = data.schema()[j];
    if (spec.kind == ColumnKind::binary) continue;
    ColumnTransform ct;
    try {
      ct.scale_b = standardize(data.column(j)).params;
    } catch (const Error& e) {
      throw Error("column '" + spec.name + "': " + e.what());
    }
    model.columns.emplace_back(spec.name, ct);
  }
  return model;
}

namespace {

void check_coverage(const Dataset& data, const TransformModel& model) {
  std::size_t non_binary = 0;
  for (const auto& spec : data.schema()) {
    if (spec.kind == ColumnKind::binary) continue;
    ++non_binary;
    if (!model.find(spec.name)) throw Error("transform model has no entry for column '" + spec.name + "'");
  }
  if (non_binary != model.columns.size()) {
    throw Error("transform model covers " + std::to_string(model.columns.size()) +
                " columns, data has " + std::to_string(non_binary) + " non-binary columns");
  }
}

}  // namespace

Dataset apply_forward(const Dataset& data, const TransformModel& model) {
  check_coverage(data, model);
  std::vector<std::vector<double>> cols(data.cols());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto& spec = data.schema()[j];
    if (spec.kind == ColumnKind::binary) {
      cols[j] = data.column_vector(j);
      continue;
    }
    try {
      cols[j] = column_forward(data.column(j), *model.find(spec.name), model.mode);
    } catch (const Error& e) {
      throw Error("column '" + spec.name + "': " + e.what());
    }
  }
  Schema schema = data.schema();
  return Dataset(std::move(schema), std::move(cols));
}

Dataset apply_inverse(const Dataset& data, const TransformModel& model) {
  check_coverage(data, model);
  std::vector<std::vector<double>> cols(data.cols());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto& spec = data.schema()[j];
    if (spec.kind == ColumnKind::binary) {
      cols[j] = data.column_vector(j);
      continue;
    }
    cols[j] = column_inverse(data.column(j), *model.find(spec.name), model.mode);
    if (spec.kind == ColumnKind::integer_continuous) {
      for (double& v : cols[j]) v = std::round(v);
    }
  }
  Schema schema = data.schema();
  return Dataset(std::move(schema), std::move(cols));
}

void to_json(nlohmann::json& j, const TransformModel& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, ct] : m.columns) {
    cols.push_back({{"name", name},
                    {"lambda1", ct.boxcox.lambda1},
                    {"lambda2", ct.boxcox.lambda2},
                    {"scale_a", ct.scale_a},
                    {"alpha", ct.power.alpha},
                    {"beta1", ct.power.beta1},
                    {"beta2", ct.power.beta2},
                    {"rho", ct.power.rho},
                    {"scale_b", ct.scale_b}});
  }
  j = nlohmann::json{
      {"mode", m.mode == TransformMode::full ? "full" : "standardize_only"},
      {"columns", cols},
  };
}

void from_json(const nlohmann::json& j, TransformModel& m) {
  const auto mode = j.value("mode", std::string("full"));
  if (mode == "full") {
    m.mode = TransformMode::full;
  } else if (mode == "standardize_only") {
    m.mode = TransformMode::standardize_only;
  } else {
    throw Error("unknown transform mode '" + mode + "'");
  }
  m.columns.clear();
  for (const auto& c : j.at("columns")) {
    ColumnTransform ct;
    ct.boxcox = {c.at("lambda1").get<double>(), c.at("lambda2").get<double>()};
    ct.scale_a = c.at("scale_a").get<ScalingParams>();
    ct.power = {c.at("alpha").get<double>(), c.at("beta1").get<double>(), c.at("beta2").get<double>(),
                c.at("rho").get<double>()};
    ct.scale_b = c.at("scale_b").get<ScalingParams>();
    m.columns.emplace_back(c.at("name").get<std::string>(), ct);
  }
}

}  // namespace ptvae::transform
