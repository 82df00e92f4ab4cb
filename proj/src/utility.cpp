#include "ptvae/utility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ptvae/random.hpp"

namespace ptvae::eval {

namespace {

void check_same_schema(const Dataset& a, const Dataset& b) {
  if (a.schema() != b.schema()) throw Error("original and synthetic schemas differ");
}

double leaf_pmse(const Tree& tree, double c) {
  double total = 0.0;
  double n = 0.0;
  for (const auto& node : tree.nodes()) {
    if (node.feature >= 0) continue;
    const double d = node.probability - c;
    total += static_cast<double>(node.count) * d * d;
    n += static_cast<double>(node.count);
  }
  return total / n;
}

}  // namespace

std::pair<FeatureMatrix, std::vector<int>> merge_for_propensity(const Dataset& original,
                                                                const Dataset& synthetic) {
  check_same_schema(original, synthetic);
  const std::size_t n0 = original.rows(), n1 = synthetic.rows();
  FeatureMatrix x(static_cast<Eigen::Index>(n0 + n1), static_cast<Eigen::Index>(original.cols()));
  std::vector<int> labels(n0 + n1, 0);
  for (std::size_t j = 0; j < original.cols(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < n0; ++i) x(static_cast<Eigen::Index>(i), jj) = original.at(i, j);
    for (std::size_t i = 0; i < n1; ++i) x(static_cast<Eigen::Index>(n0 + i), jj) = synthetic.at(i, j);
  }
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n0), labels.end(), 1);
  return {std::move(x), std::move(labels)};
}

double pmse_from_labels(const FeatureMatrix& x, std::span<const int> labels,
                        const CartParams& params, std::uint64_t seed) {
  double ones = 0.0;
  for (int v : labels) ones += v;
  const double c = ones / static_cast<double>(labels.size());
  return leaf_pmse(fit_cart(x, labels, params, seed), c);
}

PmseResult pmse(const Dataset& original, const Dataset& synthetic, const CartParams& params,
                std::uint64_t seed) {
  auto [x, labels] = merge_for_propensity(original, synthetic);
  if (labels.empty()) throw Error("pmse: both datasets are empty");
  const double c = static_cast<double>(synthetic.rows()) / static_cast<double>(labels.size());
  return {pmse_from_labels(x, labels, params, seed), c};
}

UtilityReport pmse_ratio(const Dataset& original, const Dataset& synthetic,
                         const CartParams& params, std::size_t n_perm, std::uint64_t seed) {
  if (n_perm < 2) throw Error("pmse_ratio needs at least 2 permutations");
  auto [x, labels] = merge_for_propensity(original, synthetic);
  UtilityReport r;
  r.n_orig = original.rows();
  r.n_syn = synthetic.rows();
  r.c = static_cast<double>(r.n_syn) / static_cast<double>(r.n_orig + r.n_syn);
  r.n_perm = n_perm;
  r.pmse = pmse_from_labels(x, labels, params, seed);

  r.null_pmse.resize(n_perm);
  std::vector<int> permuted = labels;
  for (std::size_t k = 0; k < n_perm; ++k) {
    permuted = labels;
    Rng rng(derive_seed(seed, k + 1));
    std::shuffle(permuted.begin(), permuted.end(), rng);
    r.null_pmse[k] = pmse_from_labels(x, permuted, params, seed);
  }
  double sum = 0.0;
  for (double v : r.null_pmse) sum += v;
  r.null_mean = sum / static_cast<double>(n_perm);
  double ss = 0.0;
  for (double v : r.null_pmse) ss += (v - r.null_mean) * (v - r.null_mean);
  r.null_sd = std::sqrt(ss / static_cast<double>(n_perm - 1));
  if (r.null_mean > 0.0) {
    r.pmse_ratio = r.pmse / r.null_mean;
  } else {
    r.pmse_ratio = std::numeric_limits<double>::infinity();
    r.ratio_undefined = true;
  }
  r.marginals = marginal_report(original, synthetic);
  return r;
}

Histogram histogram(std::span<const double> x, double lo, double hi, std::size_t bins) {
  if (bins == 0) throw Error("histogram needs at least one bin");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : x) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

bool has_two_modes(std::span<const std::size_t> counts, double valley_ratio, double min_peak_share) {
  if (counts.size() < 3) return false;
  const double top = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  const double floor = min_peak_share * top;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (static_cast<double>(counts[i]) < floor || counts[i] == 0) continue;
    std::size_t valley = counts[i];
    for (std::size_t k = i + 1; k < counts.size(); ++k) {
      const double peak = static_cast<double>(std::min(counts[i], counts[k]));
      if (k > i + 1 && static_cast<double>(counts[k]) >= floor &&
          static_cast<double>(valley) < valley_ratio * peak) {
        return true;
      }
      valley = std::min(valley, counts[k]);
    }
  }
  return false;
}

namespace {

DistributionSummary summarize(std::span<const double> x) {
  DistributionSummary s;
  if (x.empty()) return s;
  if (x.size() < 4) {
    s.mean = mean(x);
    s.sd = sd(x);
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    return s;
  }
  const auto st = column_stats(x);
  s.mean = st.mean;
  s.sd = st.sd;
  s.skewness = st.skewness;
  s.kurtosis = st.kurtosis;
  if (st.skewness && st.kurtosis) s.bimodality = (*st.skewness * *st.skewness + 1.0) / *st.kurtosis;
  s.min = st.min;
  s.max = st.max;
  return s;
}

}  // namespace

std::vector<MarginalSummary> marginal_report(const Dataset& original, const Dataset& synthetic,
                                             std::size_t bins) {
  check_same_schema(original, synthetic);
  std::vector<MarginalSummary> out;
  for (std::size_t j = 0; j < original.cols(); ++j) {
    const auto xo = original.column(j);
    const auto xs = synthetic.column(j);
    MarginalSummary m;
    m.name = original.schema()[j].name;
    m.kind = original.schema()[j].kind;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : xo) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : xs) lo = std::min(lo, v), hi = std::max(hi, v);
    if (!std::isfinite(lo)) lo = hi = 0.0;
    const std::size_t nb = m.kind == ColumnKind::binary ? 2 : bins;
    if (m.kind == ColumnKind::binary) lo = 0.0, hi = 1.0;
    auto ho = histogram(xo, lo, hi, nb);
    auto hs = histogram(xs, lo, hi, nb);
    m.edges = ho.edges;
    m.count_orig = std::move(ho.counts);
    m.count_syn = std::move(hs.counts);
    m.orig = summarize(xo);
    m.syn = summarize(xs);
    if (m.kind == ColumnKind::binary) {
      if (!xo.empty()) m.frequency_orig = m.orig.mean;
      if (!xs.empty()) m.frequency_syn = m.syn.mean;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_marginal_csvs(const std::vector<MarginalSummary>& report,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& m : report) {
    std::ofstream f(dir / (m.name + ".csv"));
    if (!f) throw Error("cannot write marginal csv for " + m.name);
    f << "bin_left,bin_right,count_orig,count_syn\n";
    for (std::size_t b = 0; b < m.count_orig.size(); ++b) {
      f << format_double(m.edges[b]) << ',' << format_double(m.edges[b + 1]) << ','
        << m.count_orig[b] << ',' << m.count_syn[b] << '\n';
    }
  }
}

namespace {
nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace

void to_json(nlohmann::json& j, const DistributionSummary& s) {
  j = nlohmann::json{{"mean", s.mean},
                     {"sd", s.sd},
                     {"skewness", opt(s.skewness)},
                     {"kurtosis", opt(s.kurtosis)},
                     {"bimodality_coefficient", opt(s.bimodality)},
                     {"min", s.min},
                     {"max", s.max}};
}

void to_json(nlohmann::json& j, const MarginalSummary& m) {
  j = nlohmann::json{{"name", m.name},
                     {"kind", to_string(m.kind)},
                     {"bin_edges", m.edges},
                     {"count_orig", m.count_orig},
                     {"count_syn", m.count_syn},
                     {"original", m.orig},
                     {"synthetic", m.syn}};
  if (m.frequency_orig) j["frequency_orig"] = *m.frequency_orig;
  if (m.frequency_syn) j["frequency_syn"] = *m.frequency_syn;
}

void to_json(nlohmann::json& j, const UtilityReport& r) {
  j = nlohmann::json{{"pmse", r.pmse},
                     {"null_mean", r.null_mean},
                     {"null_sd", r.null_sd},
                     {"pmse_ratio", r.ratio_undefined ? nlohmann::json("inf") : nlohmann::json(r.pmse_ratio)},
                     {"ratio_undefined", r.ratio_undefined},
                     {"n_orig", r.n_orig},
                     {"n_syn", r.n_syn},
                     {"c", r.c},
                     {"n_perm", r.n_perm},
                     {"null_pmse", r.null_pmse},
                     {"marginals", r.marginals}};
}

}  // namespace ptvae::eval
