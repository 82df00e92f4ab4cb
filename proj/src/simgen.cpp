#include "ptvae/simgen.hpp"

#include <cmath>
#include <random>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "ptvae/random.hpp"

namespace ptvae::sim {

std::string to_string(MarginalKind kind) {
  switch (kind) {
    case MarginalKind::binary: return "binary";
    case MarginalKind::lognormal: return "lognormal";
    case MarginalKind::gaussian: return "gaussian";
  }
  return "gaussian";
}

MarginalKind marginal_kind_from_string(const std::string& s) {
  if (s == "binary") return MarginalKind::binary;
  if (s == "lognormal") return MarginalKind::lognormal;
  if (s == "gaussian") return MarginalKind::gaussian;
  throw Error("unknown marginal type '" + s + "'");
}

void SimConfig::check() const {
  if (n == 0) throw Error("sim config: n must be positive");
  if (columns.empty()) throw Error("sim config: no columns");
  const auto d = static_cast<Eigen::Index>(columns.size());
  if (correlation.rows() != d || correlation.cols() != d) {
    throw Error("sim config: correlation matrix must be " + std::to_string(d) + "x" +
                std::to_string(d));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (correlation(i, i) != 1.0) throw Error("sim config: correlation diagonal must be 1");
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!std::isfinite(correlation(i, k)) || correlation(i, k) != correlation(k, i)) {
        throw Error("sim config: correlation matrix must be symmetric");
      }
    }
  }
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (c.name.empty() || !names.insert(c.name).second) {
      throw Error("sim config: column names must be unique and non-empty");
    }
    if (c.kind == MarginalKind::binary && !(c.prevalence > 0.0 && c.prevalence < 1.0)) {
      throw Error("sim config: prevalence of " + c.name + " must lie in (0, 1)");
    }
    if (c.kind != MarginalKind::binary && !(c.sigma > 0.0 && std::isfinite(c.mu))) {
      throw Error("sim config: " + c.name + " needs finite mu and sigma > 0");
    }
  }
  if (bimodal) {
    const auto& b = *bimodal;
    if (b.name.empty() || names.count(b.name)) throw Error("sim config: bad bimodal column name");
    bool found = false;
    for (const auto& c : columns) {
      if (c.name == b.driver) {
        if (c.kind != MarginalKind::binary) throw Error("sim config: bimodal driver must be binary");
        found = true;
      }
    }
    if (!found) throw Error("sim config: bimodal driver '" + b.driver + "' not found");
    if (!(b.sd0 > 0.0 && b.sd1 > 0.0)) throw Error("sim config: bimodal sds must be positive");
  }
}

Schema SimConfig::schema() const {
  Schema s;
  for (const auto& c : columns) {
    ColumnKind kind = ColumnKind::continuous;
    if (c.kind == MarginalKind::binary) {
      kind = ColumnKind::binary;
    } else if (c.integer) {
      kind = ColumnKind::integer_continuous;
    }
    s.push_back({c.name, kind});
  }
  if (bimodal) s.push_back({bimodal->name, ColumnKind::continuous});
  return s;
}

Eigen::MatrixXd ar1_correlation(std::size_t dim, double rho) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) r(i, k) = std::pow(rho, static_cast<double>(std::abs(i - k)));
  }
  return r;
}

SimConfig default_config() {
  SimConfig c;
  auto binary = [](std::string name, double p) {
    MarginalSpec m;
    m.name = std::move(name);
    m.kind = MarginalKind::binary;
    m.prevalence = p;
    return m;
  };
  auto cont = [](std::string name, MarginalKind kind, double mu, double sigma, bool integer) {
    MarginalSpec m;
    m.name = std::move(name);
    m.kind = kind;
    m.mu = mu;
    m.sigma = sigma;
    m.integer = integer;
    return m;
  };
  using K = MarginalKind;
  c.columns = {
      binary("treatment", 0.3),
      cont("age", K::gaussian, 60.0, 10.0, true),
      binary("b01", 0.1),
      cont("size", K::lognormal, 3.0, 0.4, false),
      binary("b02", 0.16),
      cont("nodes", K::lognormal, 0.5, 1.2, false),
      binary("b03", 0.22),
      cont("score", K::gaussian, 0.0, 1.0, false),
      binary("b04", 0.28),
      cont("grade", K::gaussian, 20.0, 5.0, true),
      binary("b05", 0.34),
      cont("marker", K::lognormal, 1.0, 0.6, false),
      binary("b06", 0.4),
      cont("volume", K::lognormal, 2.0, 0.25, false),
      binary("b07", 0.46),
      cont("weight", K::gaussian, 100.0, 15.0, false),
      binary("b08", 0.52),
      binary("b09", 0.58),
      binary("b10", 0.64),
      binary("b11", 0.7),
  };
  c.correlation = ar1_correlation(c.columns.size(), 0.4);
  c.bimodal = BimodalSpec{"bimodal", "treatment", 0.0, 1.0, 4.0, 1.0};
  c.n = 2500;
  c.seed = 1;
  return c;
}

Dataset generate_benchmark(const SimConfig& config) {
  config.check();
  Eigen::LLT<Eigen::MatrixXd> llt(config.correlation);
  if (llt.info() != Eigen::Success) throw Error("sim config: correlation matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const auto d = static_cast<Eigen::Index>(config.columns.size());
  const std::size_t n = config.n;

  Rng rng(derive_seed(config.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  boost::math::normal_distribution<double> std_normal(0.0, 1.0);

  std::vector<double> cut(config.columns.size(), 0.0);
  for (std::size_t j = 0; j < config.columns.size(); ++j) {
    if (config.columns[j].kind == MarginalKind::binary) {
      cut[j] = boost::math::quantile(std_normal, 1.0 - config.columns[j].prevalence);
    }
  }

  std::vector<std::vector<double>> cols(config.columns.size(), std::vector<double>(n));
  Eigen::VectorXd e(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) e(k) = normal(rng);
    const Eigen::VectorXd z = l * e;
    for (std::size_t j = 0; j < config.columns.size(); ++j) {
      const auto& m = config.columns[j];
      const double zj = z(static_cast<Eigen::Index>(j));
      double v = 0.0;
      switch (m.kind) {
        case MarginalKind::binary: v = zj > cut[j] ? 1.0 : 0.0; break;
        case MarginalKind::lognormal: v = std::exp(m.mu + m.sigma * zj); break;
        case MarginalKind::gaussian: v = m.mu + m.sigma * zj; break;
      }
      if (m.integer && m.kind != MarginalKind::binary) v = std::round(v);
      cols[j][i] = v;
    }
  }

  if (config.bimodal) {
    const auto& b = *config.bimodal;
    std::size_t driver = 0;
    for (std::size_t j = 0; j < config.columns.size(); ++j) {
      if (config.columns[j].name == b.driver) driver = j;
    }
    Rng brng(derive_seed(config.seed, 2));
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = normal(brng);
      v[i] = cols[driver][i] == 1.0 ? b.mean1 + b.sd1 * u : b.mean0 + b.sd0 * u;
    }
    cols.push_back(std::move(v));
  }

  Dataset out(config.schema(), std::move(cols));
  out.validate();
  return out;
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& m : c.columns) {
    nlohmann::json e{{"name", m.name}, {"type", to_string(m.kind)}};
    if (m.kind == MarginalKind::binary) {
      e["prevalence"] = m.prevalence;
    } else {
      e["mu"] = m.mu;
      e["sigma"] = m.sigma;
      e["integer"] = m.integer;
    }
    cols.push_back(std::move(e));
  }
  nlohmann::json corr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.correlation.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < c.correlation.cols(); ++k) row.push_back(c.correlation(i, k));
    corr.push_back(std::move(row));
  }
  j = nlohmann::json{{"n", c.n}, {"seed", c.seed}, {"columns", cols}, {"correlation", corr}};
  if (c.bimodal) {
    const auto& b = *c.bimodal;
    j["bimodal"] = {{"name", b.name}, {"driver", b.driver}, {"mean0", b.mean0},
                    {"sd0", b.sd0},   {"mean1", b.mean1},   {"sd1", b.sd1}};
  }
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  c = SimConfig{};
  c.n = j.value("n", std::size_t{2500});
  c.seed = j.value("seed", std::uint64_t{1});
  for (const auto& e : j.at("columns")) {
    MarginalSpec m;
    m.name = e.at("name").get<std::string>();
    m.kind = marginal_kind_from_string(e.at("type").get<std::string>());
    m.prevalence = e.value("prevalence", 0.5);
    m.mu = e.value("mu", 0.0);
    m.sigma = e.value("sigma", 1.0);
    m.integer = e.value("integer", false);
    c.columns.push_back(std::move(m));
  }
  const auto d = static_cast<Eigen::Index>(c.columns.size());
  if (j.contains("correlation")) {
    const auto& corr = j.at("correlation");
    if (corr.size() != c.columns.size()) throw Error("sim config: correlation has wrong row count");
    c.correlation.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& row = corr.at(static_cast<std::size_t>(i));
      if (row.size() != c.columns.size()) throw Error("sim config: correlation has wrong column count");
      for (Eigen::Index k = 0; k < d; ++k) c.correlation(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
  } else {
    c.correlation = Eigen::MatrixXd::Identity(d, d);
  }
  if (j.contains("bimodal") && !j.at("bimodal").is_null()) {
    const auto& b = j.at("bimodal");
    BimodalSpec s;
    s.name = b.value("name", std::string("bimodal"));
    s.driver = b.at("driver").get<std::string>();
    s.mean0 = b.value("mean0", 0.0);
    s.sd0 = b.value("sd0", 1.0);
    s.mean1 = b.value("mean1", 4.0);
    s.sd1 = b.value("sd1", 1.0);
    c.bimodal = s;
  }
}

}  // namespace ptvae::sim
