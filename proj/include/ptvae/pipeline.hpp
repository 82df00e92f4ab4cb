#pragma once

// Batch front-end: simulate, fit, generate, evaluate and the end-to-end
// pipeline with a plain-VAE baseline. Every stage seed is derived from
// RunConfig::seed, so a run is a pure function of its config.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptvae/cart.hpp"
#include "ptvae/data.hpp"
#include "ptvae/simgen.hpp"
#include "ptvae/transform.hpp"
#include "ptvae/utility.hpp"
#include "ptvae/vae.hpp"

namespace ptvae::pipeline {

/// Empty paths resolve to fixed file names inside out_dir.
struct Paths {
  std::filesystem::path data;
  std::filesystem::path schema;
  std::filesystem::path synthetic;
  std::filesystem::path transform_model;
  std::filesystem::path vae_model;
  std::filesystem::path out_dir = "out";
};

struct GenerateSettings {
  /// 0 means "same as the original row count"
  std::size_t n = 0;
  vae::GenerationMode mode = vae::GenerationMode::prior;
};

struct EvaluateSettings {
  eval::CartParams cart;
  std::size_t n_perm = 100;
  std::size_t bins = 30;
};

struct RunConfig {
  Paths paths;
  transform::TransformConfig transform;
  vae::TrainConfig train;
  Eigen::Index hidden_dim = 0;
  Eigen::Index latent_dim = 3;
  GenerateSettings generate;
  EvaluateSettings evaluate;
  sim::SimConfig sim = sim::default_config();
  std::uint64_t seed = 1;
  bool force = false;
};

enum class Stage : std::uint64_t { simulate = 1, train = 2, generate = 3, evaluate = 4 };

std::uint64_t stage_seed(const RunConfig& cfg, Stage s);

RunConfig load_run_config(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// ---- in-memory stages --------------------------------------------------------

struct FitResult {
  transform::TransformModel transform;
  vae::VaeModel vae;
  std::vector<double> loss_trace;
};

/// The baseline variant replaces the transform with standardisation only.
FitResult fit_models(const Dataset& data, const RunConfig& cfg,
                     transform::TransformMode mode = transform::TransformMode::full);

Dataset generate_synthetic(const FitResult& fit, const RunConfig& cfg, std::size_t n_orig,
                           const Dataset* original);

eval::UtilityReport evaluate(const Dataset& original, const Dataset& synthetic, const RunConfig& cfg);

struct VariantResult {
  FitResult fit;
  Dataset synthetic;
  eval::UtilityReport report;
};

VariantResult run_variant(const Dataset& original, const RunConfig& cfg, transform::TransformMode mode);

// ---- file-producing commands -------------------------------------------------

/// Writes data.csv, schema.json and sim_config.json.
void cmd_simulate(const RunConfig& cfg);
/// Writes transform_model.json, vae_model.json and loss_trace.csv.
void cmd_fit(const RunConfig& cfg);
/// Writes synthetic.csv.
void cmd_generate(const RunConfig& cfg);
/// Writes report.json and marginals/<name>.csv.
void cmd_evaluate(const RunConfig& cfg);

struct PipelineSummary {
  eval::UtilityReport ptvae;
  eval::UtilityReport vae;
};

/// Simulates data unless paths.data is set, then fits, generates and evaluates
/// both variants into out_dir/ptvae and out_dir/vae.
PipelineSummary cmd_pipeline(const RunConfig& cfg);

void write_loss_trace(const std::vector<double>& trace, const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace ptvae::pipeline
