#include "ptvae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ptvae {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::integer_continuous: return "integer_continuous";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "binary") return ColumnKind::binary;
  if (s == "integer_continuous" || s == "integer") return ColumnKind::integer_continuous;
  throw Error("unknown column kind '" + s + "'");
}

Dataset::Dataset(Schema schema)
    : schema_(std::move(schema)), columns_(schema_.size()), rows_(0) {}

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.size()) {
    throw Error("dataset has " + std::to_string(columns_.size()) + " columns but schema lists " +
                std::to_string(schema_.size()));
  }
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].size() != rows_) {
      throw Error("column '" + schema_[j].name + "' has " + std::to_string(columns_[j].size()) +
                  " rows, expected " + std::to_string(rows_));
    }
  }
}

std::optional<std::size_t> Dataset::find_column(const std::string& name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t Dataset::column_index(const std::string& name) const {
  if (auto j = find_column(name)) return *j;
  throw Error("no column named '" + name + "'");
}

void Dataset::validate() const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& spec = schema_[j];
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = columns_[j][i];
      if (!std::isfinite(v)) {
        throw Error("column '" + spec.name + "' row " + std::to_string(i) + ": non-finite value");
      }
      if (spec.kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
        throw Error("binary column '" + spec.name + "' contains value " + format_double(v) +
                    " at row " + std::to_string(i));
      }
      if (spec.kind == ColumnKind::integer_continuous && v != std::round(v)) {
        throw Error("integer column '" + spec.name + "' contains non-integer " + format_double(v) +
                    " at row " + std::to_string(i));
      }
    }
  }
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(schema_.size());
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    cols[j].reserve(rows.size());
    for (std::size_t r : rows) cols[j].push_back(columns_[j].at(r));
  }
  Dataset out(schema_, std::move(cols));
  out.rows_ = rows.size();
  return out;
}

// ---- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "NULL";
}

}  // namespace

Dataset parse_csv(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("csv input is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_line(line);
  if (header.size() != schema.size()) {
    throw Error("csv header has " + std::to_string(header.size()) + " columns, schema has " +
                std::to_string(schema.size()));
  }
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (trim(header[j]) != schema[j].name) {
      throw Error("csv header column " + std::to_string(j) + " is '" + trim(header[j]) +
                  "', schema expects '" + schema[j].name + "'");
    }
  }

  std::vector<std::vector<double>> cols(schema.size());
  std::size_t line_no = 1;
  std::vector<double> row(schema.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != schema.size()) {
      throw Error("csv line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(schema.size()));
    }
    bool missing = false;
    for (auto& c : cells) {
      c = trim(c);
      if (is_missing(c)) missing = true;
    }
    if (missing) continue;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto& c = cells[j];
      const char* first = c.data();
      const char* last = c.data() + c.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, row[j]);
      if (ec != std::errc() || ptr != last) {
        throw Error("csv line " + std::to_string(line_no) + ", column '" + schema[j].name +
                    "': cannot parse '" + c + "' as a number");
      }
    }
    for (std::size_t j = 0; j < row.size(); ++j) cols[j].push_back(row[j]);
  }
  Dataset data(schema, std::move(cols));
  if (data.rows() == 0) throw Error("csv contains no complete rows");
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string format_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (j) out += ',';
    out += data.schema()[j].name;
  }
  out += '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (j) out += ',';
      out += format_double(data.at(i, j));
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << format_csv(data);
}

void to_json(nlohmann::json& j, const ColumnSpec& c) {
  j = nlohmann::json{{"name", c.name}, {"kind", to_string(c.kind)}};
}

void from_json(const nlohmann::json& j, ColumnSpec& c) {
  c.name = j.at("name").get<std::string>();
  c.kind = column_kind_from_string(j.at("kind").get<std::string>());
}

void to_json(nlohmann::json& j, const ScalingParams& s) {
  j = nlohmann::json{{"mean", s.mean}, {"two_sd", s.two_sd}};
}

void from_json(const nlohmann::json& j, ScalingParams& s) {
  s.mean = j.at("mean").get<double>();
  s.two_sd = j.at("two_sd").get<double>();
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("schema " + path.string() + ": " + e.what());
  }
  const auto& cols = j.is_object() ? j.at("columns") : j;
  return cols.get<Schema>();
}

void save_schema(const Schema& schema, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << nlohmann::json{{"columns", schema}}.dump(2) << '\n';
}

// ---- statistics ----------------------------------------------------------------

double mean(std::span<const double> x) {
  if (x.empty()) throw Error("mean of empty vector");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sd(std::span<const double> x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

Standardized standardize(std::span<const double> x) {
  const double m = mean(x);
  const double s = sd(x);
  if (!(s > 0.0)) throw Error("cannot standardize a constant column");
  ScalingParams p{m, 2.0 * s};
  return {apply_scaling(x, p), p};
}

std::vector<double> apply_scaling(std::span<const double> x, const ScalingParams& p) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - p.mean) / p.two_sd;
  return out;
}

std::vector<double> destandardize(std::span<const double> scaled, const ScalingParams& p) {
  std::vector<double> out(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) out[i] = scaled[i] * p.two_sd + p.mean;
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of empty vector");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile probability must be in [0, 1]");
  const double pos = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double q) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

ColumnStats column_stats(std::span<const double> x) {
  if (x.size() < 4) throw Error("column_stats needs at least 4 values");
  ColumnStats s;
  s.n = x.size();
  s.mean = mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.sd = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2);
  }
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q02 = quantile_sorted(sorted, 0.02);
  s.q16 = quantile_sorted(sorted, 0.16);
  s.median = quantile_sorted(sorted, 0.5);
  s.q84 = quantile_sorted(sorted, 0.84);
  s.q98 = quantile_sorted(sorted, 0.98);
  return s;
}

void to_json(nlohmann::json& j, const ColumnStats& s) {
  j = nlohmann::json{{"n", s.n},           {"mean", s.mean},     {"sd", s.sd},
                     {"min", s.min},       {"q02", s.q02},       {"q16", s.q16},
                     {"median", s.median}, {"q84", s.q84},       {"q98", s.q98},
                     {"max", s.max}};
  j["skewness"] = s.skewness ? nlohmann::json(*s.skewness) : nlohmann::json(nullptr);
  j["kurtosis"] = s.kurtosis ? nlohmann::json(*s.kurtosis) : nlohmann::json(nullptr);
}

}  // namespace ptvae
