#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <boost/math/distributions/normal.hpp>

#include "helpers.hpp"
#include "ptvae/data.hpp"

using namespace ptvae;

namespace {
Schema two_col() { return {{"x", ColumnKind::continuous}, {"b", ColumnKind::binary}}; }
}  // namespace

TEST_CASE("csv rows with a missing cell are dropped") {
  const auto d = parse_csv("x,b\n1.5,0\n,1\n2.5,1\n", two_col());
  CHECK(d.rows() == 2);
  CHECK(d.at(1, 0) == 2.5);
  const auto na = parse_csv("x,b\n1.5,NA\n2,1\n3,NaN\n", two_col());
  CHECK(na.rows() == 1);
}

TEST_CASE("binary column holding 2 is rejected by name") {
  try {
    parse_csv("x,b\n1,0\n2,2\n", two_col());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
}

TEST_CASE("integer column must hold integers") {
  Schema s{{"k", ColumnKind::integer_continuous}};
  CHECK_NOTHROW(parse_csv("k\n3\n4\n", s));
  CHECK_THROWS_AS(parse_csv("k\n3.5\n", s), Error);
}

TEST_CASE("header mismatch and bad numbers are errors") {
  CHECK_THROWS_AS(parse_csv("b,x\n0,1\n", two_col()), Error);
  CHECK_THROWS_AS(parse_csv("x,b\nabc,1\n", two_col()), Error);
}

TEST_CASE("csv and schema round trip through files") {
  const auto dir = std::filesystem::temp_directory_path() / "ptvae_test_data";
  std::filesystem::create_directories(dir);
  Dataset d(two_col(), {{0.1, 1.0 / 3.0, -2e-300}, {0, 1, 1}});
  save_csv(d, dir / "d.csv");
  save_schema(d.schema(), dir / "s.json");
  const auto schema = load_schema(dir / "s.json");
  CHECK(schema == d.schema());
  CHECK(load_csv(dir / "d.csv", schema) == d);
  std::filesystem::remove_all(dir);
}

TEST_CASE("large well-formed file keeps its shape") {
  Schema s;
  for (int j = 0; j < 21; ++j) s.push_back({"c" + std::to_string(j), ColumnKind::continuous});
  std::vector<std::vector<double>> cols(21, testing::normal_sample(2500, 0, 1, 3));
  Dataset d(s, cols);
  const auto back = parse_csv(format_csv(d), s);
  CHECK(back.rows() == 2500);
  CHECK(back.cols() == 21);
}

TEST_CASE("standardize scales to half unit sd") {
  std::vector<double> x{0.0, 2.0};
  const auto s = standardize(x);
  CHECK(s.scaled[0] == doctest::Approx(-0.5));
  CHECK(s.scaled[1] == doctest::Approx(0.5));
  CHECK(s.params.mean == 1.0);
  CHECK(s.params.two_sd == doctest::Approx(2.0 * sd(x)));

  std::vector<double> c{5, 5, 5};
  CHECK_THROWS_AS(standardize(c), Error);

  const auto big = testing::normal_sample(10000, 3, 2, 11);
  const double s_sd = sd(standardize(big).scaled);
  CHECK(s_sd > 0.49);
  CHECK(s_sd < 0.51);
}

TEST_CASE("destandardize inverts standardize") {
  std::vector<double> z{-0.5, 0.5};
  const auto x = destandardize(z, {1.0, 2.0});
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 2.0);
  std::vector<double> zero(4, 0.0);
  for (double v : destandardize(zero, {7.0, 3.0})) CHECK(v == 7.0);

  const auto r = testing::normal_sample(500, -4, 9, 5);
  const auto s = standardize(r);
  const auto back = destandardize(s.scaled, s.params);
  double err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) err = std::max(err, std::abs(back[i] - r[i]));
  CHECK(err < 1e-10);
}

TEST_CASE("quantile interpolates linearly") {
  std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(quantile(x, 0.5) == 3.0);
  std::vector<double> y{0, 10};
  CHECK(quantile(y, 0.25) == 2.5);
  std::vector<double> unsorted{5, 1, 4, 2, 3};
  CHECK(quantile(unsorted, 0.5) == 3.0);

  const auto big = testing::normal_sample(1000000, 0, 1, 17);
  const double exact = boost::math::quantile(boost::math::normal(), 0.84);
  CHECK(std::abs(quantile(big, 0.84) - exact) < 0.01);
}

TEST_CASE("moments of reference distributions") {
  const auto n = column_stats(testing::normal_sample(200000, 0, 1, 21));
  CHECK(std::abs(*n.skewness) < 0.05);
  CHECK(std::abs(*n.kurtosis - 3.0) < 0.1);

  std::vector<double> two{-1, 1, -1, 1, -1, 1};
  CHECK(*column_stats(two).skewness == 0.0);

  const auto u = column_stats(testing::uniform_sample(200000, 0, 1, 23));
  CHECK(std::abs(*u.kurtosis - 1.8) < 0.05);

  std::vector<double> c{2, 2, 2, 2};
  CHECK_FALSE(column_stats(c).skewness.has_value());
}
