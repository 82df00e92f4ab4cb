#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ptvae/random.hpp"

namespace testing {

inline std::vector<double> normal_sample(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  ptvae::Rng rng(seed);
  std::normal_distribution<double> d(mu, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

inline std::vector<double> uniform_sample(std::size_t n, double lo, double hi, std::uint64_t seed) {
  ptvae::Rng rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

inline std::vector<double> lognormal_sample(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  auto x = normal_sample(n, mu, sigma, seed);
  for (auto& v : x) v = std::exp(v);
  return x;
}

/// 0.5 N(-m, s^2) + 0.5 N(m, s^2)
inline std::vector<double> mixture_sample(std::size_t n, double m, double s, std::uint64_t seed) {
  ptvae::Rng rng(seed);
  std::normal_distribution<double> d(0.0, s);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> x(n);
  for (auto& v : x) v = (coin(rng) ? m : -m) + d(rng);
  return x;
}

/// Central differences of f around x, step h.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Grid maximiser of the Box-Cox profile log-likelihood over [-2, 2], step 0.01.
inline double boxcox_grid_oracle(const std::vector<double>& y, double lambda2) {
  const double n = static_cast<double>(y.size());
  double sum_log = 0.0;
  for (double v : y) sum_log += std::log(v + lambda2);
  double best = -INFINITY, arg = 0.0;
  for (int k = -200; k <= 200; ++k) {
    const double lam = k / 100.0;
    std::vector<double> t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double s = y[i] + lambda2;
      t[i] = k == 0 ? std::log(s) : (std::pow(s, lam) - 1.0) / lam;
    }
    double m = 0.0;
    for (double v : t) m += v;
    m /= n;
    double var = 0.0;
    for (double v : t) var += (v - m) * (v - m);
    var /= n;
    const double ll = -0.5 * n * std::log(var) + (lam - 1.0) * sum_log;
    if (ll > best) best = ll, arg = lam;
  }
  return arg;
}

}  // namespace testing
