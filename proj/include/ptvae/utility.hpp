#pragma once

// Propensity-score utility of synthetic data: merge original (label 0) and
// synthetic (label 1) rows, fit a CART propensity model, and measure how far
// the fitted scores stray from the synthetic share c.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptvae/cart.hpp"
#include "ptvae/data.hpp"

namespace ptvae::eval {

struct PmseResult {
  double pmse = 0.0;
  double c = 0.0;
};

/// Merged feature matrix (original rows first) and labels.
std::pair<FeatureMatrix, std::vector<int>> merge_for_propensity(const Dataset& original,
                                                                const Dataset& synthetic);

/// (1/N) sum (p_i - c)^2 for in-sample propensity scores of a tree fitted on
/// the given labels.
double pmse_from_labels(const FeatureMatrix& x, std::span<const int> labels,
                        const CartParams& params, std::uint64_t seed);

PmseResult pmse(const Dataset& original, const Dataset& synthetic, const CartParams& params,
                std::uint64_t seed = 0);

struct Histogram {
  std::vector<double> edges;  // bins + 1 values
  std::vector<std::size_t> counts;
};

/// Shared-edge histogram over [lo, hi]; values at hi land in the last bin and
/// values outside are dropped.
Histogram histogram(std::span<const double> x, double lo, double hi, std::size_t bins);

/// True when the histogram has two peaks separated by a bin below
/// `valley_ratio` of the smaller peak. Peaks under `min_peak_share` of the
/// tallest bin are ignored so that sparse tail bins do not count as modes.
bool has_two_modes(std::span<const std::size_t> counts, double valley_ratio = 0.6,
                   double min_peak_share = 0.1);

struct DistributionSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> skewness;
  std::optional<double> kurtosis;
  std::optional<double> bimodality;
  double min = 0.0;
  double max = 0.0;
};

struct MarginalSummary {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<double> edges;
  std::vector<std::size_t> count_orig;
  std::vector<std::size_t> count_syn;
  DistributionSummary orig;
  DistributionSummary syn;
  /// binary columns: share of ones (identical to the mean)
  std::optional<double> frequency_orig;
  std::optional<double> frequency_syn;
};

std::vector<MarginalSummary> marginal_report(const Dataset& original, const Dataset& synthetic,
                                             std::size_t bins = 30);

/// Writes one CSV per variable: bin_left,bin_right,count_orig,count_syn.
void write_marginal_csvs(const std::vector<MarginalSummary>& report,
                         const std::filesystem::path& dir);

struct UtilityReport {
  double pmse = 0.0;
  double null_mean = 0.0;
  double null_sd = 0.0;
  /// +infinity when null_mean == 0 (ratio_undefined is then set)
  double pmse_ratio = 0.0;
  bool ratio_undefined = false;
  std::size_t n_orig = 0;
  std::size_t n_syn = 0;
  double c = 0.0;
  std::size_t n_perm = 0;
  std::vector<double> null_pmse;
  std::vector<MarginalSummary> marginals;
};

/// pMSE plus the permutation null: labels are shuffled n_perm times, a tree
/// refitted each time, and pmse_ratio = pmse / mean(null pMSE).
UtilityReport pmse_ratio(const Dataset& original, const Dataset& synthetic,
                         const CartParams& params, std::size_t n_perm, std::uint64_t seed);

void to_json(nlohmann::json& j, const DistributionSummary& s);
void to_json(nlohmann::json& j, const MarginalSummary& m);
void to_json(nlohmann::json& j, const UtilityReport& r);

}  // namespace ptvae::eval
