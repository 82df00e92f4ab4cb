#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ptvae {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { continuous, binary, integer_continuous };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;

  bool operator==(const ColumnSpec&) const = default;
};

using Schema = std::vector<ColumnSpec>;

/// Column-major table. Every column has the same number of rows and conforms
/// to its ColumnSpec (see validate()).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Schema schema);
  Dataset(Schema schema, std::vector<std::vector<double>> columns);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.size(); }

  std::span<const double> column(std::size_t j) const { return columns_.at(j); }
  const std::vector<double>& column_vector(std::size_t j) const { return columns_.at(j); }
  std::vector<double>& mutable_column(std::size_t j) { return columns_.at(j); }
  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

  std::optional<std::size_t> find_column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;

  /// Throws Error naming the first offending column if a binary column holds
  /// anything but 0/1 or an integer_continuous column holds a non-integer.
  void validate() const;

  /// Rows selected by index, in the given order.
  Dataset select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset&) const = default;

 private:
  Schema schema_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
};

/// mean and twice the (population) standard deviation of a column.
struct ScalingParams {
  double mean = 0.0;
  double two_sd = 1.0;

  bool operator==(const ScalingParams&) const = default;
};

// ---- CSV / schema I/O -------------------------------------------------------

/// Reads a header+rows CSV. Rows with an empty (or NA/NaN) cell are dropped.
/// The header must list exactly the schema names, in order.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(const std::string& text, const Schema& schema);

/// Writes values in shortest round-trip form.
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

Schema load_schema(const std::filesystem::path& path);
void save_schema(const Schema& schema, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ColumnSpec& c);
void from_json(const nlohmann::json& j, ColumnSpec& c);
void to_json(nlohmann::json& j, const ScalingParams& s);
void from_json(const nlohmann::json& j, ScalingParams& s);

std::string format_double(double v);

// ---- statistics -------------------------------------------------------------

double mean(std::span<const double> x);
/// Population standard deviation (divisor n).
double sd(std::span<const double> x);

struct Standardized {
  std::vector<double> scaled;
  ScalingParams params;
};

/// (x - mean) / (2 sd). Throws on a constant column.
Standardized standardize(std::span<const double> x);
std::vector<double> apply_scaling(std::span<const double> x, const ScalingParams& p);
std::vector<double> destandardize(std::span<const double> scaled, const ScalingParams& p);

/// Linear interpolation between order statistics at position (n-1)q.
double quantile(std::span<const double> x, double q);
/// Same as quantile() on data that is already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

struct ColumnStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  /// Undefined (nullopt) when sd == 0.
  std::optional<double> skewness;
  /// Non-excess kurtosis, 3 for the normal.
  std::optional<double> kurtosis;
  double min = 0.0;
  double q02 = 0.0;
  double q16 = 0.0;
  double median = 0.0;
  double q84 = 0.0;
  double q98 = 0.0;
  double max = 0.0;
};

ColumnStats column_stats(std::span<const double> x);

void to_json(nlohmann::json& j, const ColumnStats& s);

}  // namespace ptvae
