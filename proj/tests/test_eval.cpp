#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "ptvae/cart.hpp"
#include "ptvae/utility.hpp"

using namespace ptvae;
using namespace ptvae::eval;

namespace {

FeatureMatrix column(const std::vector<double>& x) {
  FeatureMatrix m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return m;
}

double gini_impurity(const std::vector<int>& y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  double n1 = 0;
  for (auto r : rows) n1 += y[r];
  const double n = static_cast<double>(rows.size());
  return 2.0 * n1 * (n - n1) / n;
}

/// Exhaustive best root split: (feature, threshold, impurity).
std::tuple<int, double, double> brute_force_split(const FeatureMatrix& x, const std::vector<int>& y,
                                                  std::size_t min_leaf) {
  std::vector<std::size_t> all(y.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double best = gini_impurity(y, all);
  int feature = -1;
  double threshold = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> values;
    for (Eigen::Index i = 0; i < x.rows(); ++i) values.push_back(x(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double t = 0.5 * (values[k] + values[k + 1]);
      std::vector<std::size_t> l, r;
      for (std::size_t i = 0; i < y.size(); ++i) (x(static_cast<Eigen::Index>(i), j) <= t ? l : r).push_back(i);
      if (l.size() < min_leaf || r.size() < min_leaf) continue;
      const double g = gini_impurity(y, l) + gini_impurity(y, r);
      if (g < best - 1e-9) best = g, feature = static_cast<int>(j), threshold = t;
    }
  }
  return {feature, threshold, best};
}

Dataset sample(std::size_t n, double shift, std::uint64_t seed) {
  auto a = testing::normal_sample(n, shift, 1, seed);
  auto b = testing::uniform_sample(n, 0, 1, seed + 1);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = b[i] < 0.4 ? 1.0 : 0.0;
  return Dataset({{"a", ColumnKind::continuous}, {"c", ColumnKind::binary}}, {a, c});
}

}  // namespace

TEST_CASE("pure and depth-zero trees are single leaves") {
  const auto x = column(testing::normal_sample(100, 0, 1, 1));
  std::vector<int> zeros(100, 0);
  const auto t = fit_cart(x, zeros, {});
  CHECK(t.leaf_count() == 1);
  std::vector<double> probe{3.0};
  CHECK(t.predict_proba(probe) == 0.0);

  std::vector<int> y(100, 0);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto d0 = fit_cart(x, y, {20, 0});
  CHECK(d0.leaf_count() == 1);
  CHECK(d0.predict_proba(probe) == doctest::Approx(0.3));
}

TEST_CASE("separable 1-d data splits once inside the gap") {
  std::vector<double> v;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    v.push_back(-1.0 - i * 0.01);
    y.push_back(0);
    v.push_back(0.5 + i * 0.01);
    y.push_back(1);
  }
  const auto t = fit_cart(column(v), y, {});
  CHECK(t.depth() == 1);
  CHECK(t.leaf_count() == 2);
  CHECK(t.nodes()[0].threshold > -1.0);
  CHECK(t.nodes()[0].threshold < 0.5);
  std::vector<double> neg{-1.0}, pos{1.0};
  CHECK(t.predict_proba(neg) == 0.0);
  CHECK(t.predict_proba(pos) == 1.0);
}

TEST_CASE("root split matches a brute-force search") {
  Rng rng(5);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    FeatureMatrix x(120, 3);
    std::vector<int> y(120);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < 120; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = std::round(nd(rng) * 4) / 4;
      y[static_cast<std::size_t>(i)] = x(i, 1) + 0.7 * nd(rng) > 0 ? 1 : coin(rng) & (trial % 2);
    }
    const auto [f, thr, imp] = brute_force_split(x, y, 20);
    const auto t = fit_cart(x, y, {20, 1});
    REQUIRE(f >= 0);
    CHECK(t.nodes()[0].feature == f);
    CHECK(t.nodes()[0].threshold == doctest::Approx(thr));
    const auto& l = t.nodes()[static_cast<std::size_t>(t.nodes()[0].left)];
    const auto& r = t.nodes()[static_cast<std::size_t>(t.nodes()[0].right)];
    const double g = 2.0 * l.count * l.probability * (1 - l.probability) +
                     2.0 * r.count * r.probability * (1 - r.probability);
    CHECK(g == doctest::Approx(imp));
  }
}

TEST_CASE("tree respects min_leaf and depth, and impurity falls with depth") {
  Rng rng(7);
  std::normal_distribution<double> nd;
  FeatureMatrix x(800, 4);
  std::vector<int> y(800);
  for (Eigen::Index i = 0; i < 800; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = nd(rng);
    y[static_cast<std::size_t>(i)] = x(i, 0) * x(i, 1) + 0.5 * nd(rng) > 0;
  }
  double prev = 1.0;
  for (std::size_t depth = 0; depth <= 8; ++depth) {
    const auto t = fit_cart(x, y, {20, depth});
    CHECK(t.depth() <= depth);
    for (const auto& n : t.nodes()) {
      if (n.feature < 0) CHECK(n.count >= 20);
    }
    const double g = training_gini(t);
    CHECK(g <= prev + 1e-12);
    prev = g;
    for (Eigen::Index i = 0; i < 800; i += 37) {
      const double p = t.predict_proba(std::span<const double>(x.row(i).data(), 4));
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  std::vector<int> bad(800, 2);
  CHECK_THROWS_AS(fit_cart(x, bad, {}), Error);
  std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(fit_cart(x, y, {}).predict_proba(wrong), Error);
}

TEST_CASE("pmse reference values") {
  const auto orig = sample(200, 0.0, 1);
  CHECK(pmse(orig, sample(200, 0.0, 9), {20, 0}).pmse == 0.0);

  Dataset a({{"x", ColumnKind::continuous}}, {testing::uniform_sample(100, 0, 1, 2)});
  Dataset b({{"x", ColumnKind::continuous}}, {testing::uniform_sample(100, 5, 6, 3)});
  const auto r = pmse(a, b, {});
  CHECK(r.c == 0.5);
  CHECK(r.pmse == doctest::Approx(0.25));

  Dataset other({{"y", ColumnKind::continuous}}, {testing::uniform_sample(100, 0, 1, 2)});
  CHECK_THROWS_AS(pmse(a, other, {}), Error);
}

TEST_CASE("pmse ratio is near one for same-distribution halves") {
  const auto full = sample(2000, 0.0, 11);
  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < 2000; ++i) (i < 1000 ? first : second).push_back(i);
  const auto r = pmse_ratio(full.select_rows(first), full.select_rows(second), {}, 30, 4);
  CHECK(r.pmse_ratio > 0.5);
  CHECK(r.pmse_ratio < 2.0);
  CHECK(r.n_orig == 1000);
  CHECK(r.null_pmse.size() == 30);
  CHECK(r.pmse <= r.c * (1 - r.c));

  const auto shifted = pmse_ratio(full.select_rows(first), sample(1000, 1.0, 12), {}, 30, 4);
  CHECK(shifted.pmse_ratio > r.pmse_ratio);
  CHECK(shifted.pmse_ratio > 2.0);

  const auto again = pmse_ratio(full.select_rows(first), full.select_rows(second), {}, 30, 4);
  CHECK(again.null_pmse == r.null_pmse);
  CHECK_THROWS_AS(pmse_ratio(full, full, {}, 1, 0), Error);
}

TEST_CASE("collapsed generator scores worse than a faithful one") {
  const auto orig = sample(1000, 0.0, 21);
  const auto good = sample(1000, 0.0, 22);
  std::vector<std::size_t> same(1000, 0);
  const auto collapsed = orig.select_rows(same);
  const auto rg = pmse_ratio(orig, good, {}, 20, 1);
  const auto rc = pmse_ratio(orig, collapsed, {}, 20, 1);
  CHECK(rc.pmse_ratio > rg.pmse_ratio);
}

TEST_CASE("undefined ratio when the null is exactly zero") {
  Dataset a({{"x", ColumnKind::continuous}}, {std::vector<double>(30, 1.0)});
  const auto r = pmse_ratio(a, a, {}, 5, 1);
  CHECK(r.ratio_undefined);
  CHECK(std::isinf(r.pmse_ratio));
  CHECK(nlohmann::json(r)["pmse_ratio"] == "inf");
}

TEST_CASE("marginal report") {
  const auto orig = sample(500, 0.0, 31);
  const auto syn = sample(400, 0.5, 32);
  const auto self = marginal_report(orig, orig);
  for (const auto& m : self) CHECK(m.count_orig == m.count_syn);

  const auto rep = marginal_report(orig, syn, 30);
  REQUIRE(rep.size() == 2);
  std::size_t so = 0, ss = 0;
  for (auto c : rep[0].count_orig) so += c;
  for (auto c : rep[0].count_syn) ss += c;
  CHECK(so == 500);
  CHECK(ss == 400);
  CHECK(rep[0].edges.size() == 31);
  CHECK(rep[1].frequency_orig.has_value());
  CHECK(*rep[1].frequency_orig == doctest::Approx(mean(orig.column(1))));
  CHECK(rep[1].count_orig.size() == 2);
}

TEST_CASE("two-mode detection") {
  std::vector<std::size_t> uni{1, 5, 20, 60, 100, 120, 100, 60, 20, 5, 1};
  CHECK_FALSE(has_two_modes(uni));
  std::vector<std::size_t> bi{5, 40, 100, 40, 20, 50, 80, 30, 2};
  CHECK(has_two_modes(bi));
  // a sparse tail bump is not a second mode
  std::vector<std::size_t> tail{1, 10, 80, 200, 80, 10, 0, 3, 0};
  CHECK_FALSE(has_two_modes(tail));
  const auto h = histogram(testing::mixture_sample(4000, 2, 0.5, 5), -4, 4, 30);
  CHECK(has_two_modes(h.counts));
  const auto hn = histogram(testing::normal_sample(4000, 0, 1, 6), -4, 4, 30);
  CHECK_FALSE(has_two_modes(hn.counts));
}
