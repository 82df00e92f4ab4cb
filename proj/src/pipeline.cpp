#include "ptvae/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "ptvae/random.hpp"

namespace ptvae::pipeline {

namespace fs = std::filesystem;

std::uint64_t stage_seed(const RunConfig& cfg, Stage s) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
}

namespace {

fs::path or_default(const fs::path& p, const fs::path& dir, const char* name) {
  return p.empty() ? dir / name : p;
}

fs::path data_path(const RunConfig& c) { return or_default(c.paths.data, c.paths.out_dir, "data.csv"); }
fs::path schema_path(const RunConfig& c) {
  return or_default(c.paths.schema, c.paths.out_dir, "schema.json");
}
fs::path synthetic_path(const RunConfig& c) {
  return or_default(c.paths.synthetic, c.paths.out_dir, "synthetic.csv");
}
fs::path transform_path(const RunConfig& c) {
  return or_default(c.paths.transform_model, c.paths.out_dir, "transform_model.json");
}
fs::path vae_path(const RunConfig& c) {
  return or_default(c.paths.vae_model, c.paths.out_dir, "vae_model.json");
}

void guard_outputs(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw Error("refusing to overwrite " + p.string() + " (use --force)");
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

Dataset load_data(const RunConfig& cfg) {
  return load_csv(data_path(cfg), load_schema(schema_path(cfg)));
}

void write_variant(const VariantResult& v, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(nlohmann::json(v.fit.transform), dir / "transform_model.json");
  write_json(nlohmann::json(v.fit.vae), dir / "vae_model.json");
  write_loss_trace(v.fit.loss_trace, dir / "loss_trace.csv");
  save_csv(v.synthetic, dir / "synthetic.csv");
  write_json(nlohmann::json(v.report), dir / "report.json");
  eval::write_marginal_csvs(v.report.marginals, dir / "marginals");
}

std::vector<fs::path> variant_outputs(const fs::path& dir, const Schema& schema) {
  std::vector<fs::path> out{dir / "transform_model.json", dir / "vae_model.json",
                            dir / "loss_trace.csv", dir / "synthetic.csv", dir / "report.json"};
  for (const auto& c : schema) out.push_back(dir / "marginals" / (c.name + ".csv"));
  return out;
}

}  // namespace

// ---- config -----------------------------------------------------------------

RunConfig load_run_config(const fs::path& path) {
  RunConfig c = read_json(path).get<RunConfig>();
  return c;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  const auto& l = c.transform.lambda1;
  const auto& p = c.transform.power;
  j = nlohmann::json{
      {"seed", c.seed},
      {"paths",
       {{"data", c.paths.data.string()},
        {"schema", c.paths.schema.string()},
        {"synthetic", c.paths.synthetic.string()},
        {"transform_model", c.paths.transform_model.string()},
        {"vae_model", c.paths.vae_model.string()},
        {"out_dir", c.paths.out_dir.string()}}},
      {"transform",
       {{"lambda1",
         {{"learning_rate", l.learning_rate},
          {"max_iterations", l.max_iterations},
          {"tolerance", l.tolerance},
          {"gradient_tolerance", l.gradient_tolerance}}},
        {"power",
         {{"outer_rounds", p.outer_rounds},
          {"epochs", p.epochs},
          {"learning_rate", p.learning_rate},
          {"optimizer", nn::to_string(p.optimizer)},
          {"min_magnitude", p.min_magnitude}}}}},
      {"train", c.train},
      {"hidden_dim", c.hidden_dim},
      {"latent_dim", c.latent_dim},
      {"generate", {{"n", c.generate.n}, {"mode", vae::to_string(c.generate.mode)}}},
      {"evaluate",
       {{"min_leaf", c.evaluate.cart.min_leaf},
        {"max_depth", c.evaluate.cart.max_depth},
        {"n_perm", c.evaluate.n_perm},
        {"bins", c.evaluate.bins}}},
      {"sim", c.sim}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw Error("run config must be a JSON object");
  c = RunConfig{};
  c.seed = j.value("seed", c.seed);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    auto get = [&](const char* key, fs::path& dst) {
      if (p.contains(key)) dst = p.at(key).get<std::string>();
    };
    get("data", c.paths.data);
    get("schema", c.paths.schema);
    get("synthetic", c.paths.synthetic);
    get("transform_model", c.paths.transform_model);
    get("vae_model", c.paths.vae_model);
    get("out_dir", c.paths.out_dir);
  }
  if (j.contains("transform")) {
    const auto& t = j.at("transform");
    if (t.contains("lambda1")) {
      const auto& l = t.at("lambda1");
      auto& d = c.transform.lambda1;
      d.learning_rate = l.value("learning_rate", d.learning_rate);
      d.max_iterations = l.value("max_iterations", d.max_iterations);
      d.tolerance = l.value("tolerance", d.tolerance);
      d.gradient_tolerance = l.value("gradient_tolerance", d.gradient_tolerance);
    }
    if (t.contains("power")) {
      const auto& p = t.at("power");
      auto& d = c.transform.power;
      d.outer_rounds = p.value("outer_rounds", d.outer_rounds);
      d.epochs = p.value("epochs", d.epochs);
      d.learning_rate = p.value("learning_rate", d.learning_rate);
      d.optimizer = nn::optimizer_from_string(p.value("optimizer", nn::to_string(d.optimizer)));
      d.min_magnitude = p.value("min_magnitude", d.min_magnitude);
    }
  }
  if (j.contains("train")) c.train = j.at("train").get<vae::TrainConfig>();
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  if (j.contains("generate")) {
    const auto& g = j.at("generate");
    c.generate.n = g.value("n", c.generate.n);
    c.generate.mode = vae::generation_mode_from_string(g.value("mode", std::string("prior")));
  }
  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    c.evaluate.cart.min_leaf = e.value("min_leaf", c.evaluate.cart.min_leaf);
    c.evaluate.cart.max_depth = e.value("max_depth", c.evaluate.cart.max_depth);
    c.evaluate.n_perm = e.value("n_perm", c.evaluate.n_perm);
    c.evaluate.bins = e.value("bins", c.evaluate.bins);
  }
  if (j.contains("sim")) c.sim = j.at("sim").get<sim::SimConfig>();
  if (c.latent_dim < 1 || c.hidden_dim < 0) throw Error("run config: bad network dimensions");
  if (c.evaluate.n_perm < 2) throw Error("run config: n_perm must be at least 2");
  if (c.evaluate.bins < 1) throw Error("run config: bins must be at least 1");
  if (c.transform.lambda1.learning_rate <= 0.0 || c.transform.power.learning_rate <= 0.0) {
    throw Error("run config: transform learning rates must be positive");
  }
}

// ---- in-memory stages --------------------------------------------------------

FitResult fit_models(const Dataset& data, const RunConfig& cfg, transform::TransformMode mode) {
  FitResult r;
  r.transform = mode == transform::TransformMode::full ? transform::fit_transform_model(data, cfg.transform)
                                                       : transform::fit_standardize_only(data);
  const Dataset z = transform::apply_forward(data, r.transform);
  vae::TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg, Stage::train);
  auto trained = vae::train(z, vae::make_architecture(data.schema(), cfg.hidden_dim, cfg.latent_dim), tc);
  r.vae = std::move(trained.model);
  r.loss_trace = std::move(trained.loss_trace);
  return r;
}

Dataset generate_synthetic(const FitResult& fit, const RunConfig& cfg, std::size_t n_orig,
                           const Dataset* original) {
  const std::size_t n = cfg.generate.n == 0 ? n_orig : cfg.generate.n;
  return vae::synthesize(fit.transform, fit.vae, n, cfg.generate.mode, stage_seed(cfg, Stage::generate),
                         original);
}

eval::UtilityReport evaluate(const Dataset& original, const Dataset& synthetic, const RunConfig& cfg) {
  auto r = eval::pmse_ratio(original, synthetic, cfg.evaluate.cart, cfg.evaluate.n_perm,
                            stage_seed(cfg, Stage::evaluate));
  if (cfg.evaluate.bins != 30) r.marginals = eval::marginal_report(original, synthetic, cfg.evaluate.bins);
  return r;
}

VariantResult run_variant(const Dataset& original, const RunConfig& cfg, transform::TransformMode mode) {
  VariantResult v;
  v.fit = fit_models(original, cfg, mode);
  v.synthetic = generate_synthetic(v.fit, cfg, original.rows(), &original);
  v.report = evaluate(original, v.synthetic, cfg);
  return v;
}

// ---- commands -----------------------------------------------------------------

void cmd_simulate(const RunConfig& cfg) {
  const fs::path d = data_path(cfg), s = schema_path(cfg), c = cfg.paths.out_dir / "sim_config.json";
  guard_outputs({d, s, c}, cfg.force);
  sim::SimConfig sc = cfg.sim;
  sc.seed = stage_seed(cfg, Stage::simulate);
  const Dataset data = sim::generate_benchmark(sc);
  ensure_parent(d);
  ensure_parent(s);
  fs::create_directories(cfg.paths.out_dir);
  save_csv(data, d);
  save_schema(data.schema(), s);
  write_json(nlohmann::json(sc), c);
}

void cmd_fit(const RunConfig& cfg) {
  const fs::path t = transform_path(cfg), v = vae_path(cfg), l = cfg.paths.out_dir / "loss_trace.csv";
  guard_outputs({t, v, l}, cfg.force);
  const Dataset data = load_data(cfg);
  FitResult r;
  try {
    r = fit_models(data, cfg);
  } catch (const Error& e) {
    throw Error(std::string("fit: ") + e.what());
  }
  ensure_parent(t);
  ensure_parent(v);
  fs::create_directories(cfg.paths.out_dir);
  write_json(nlohmann::json(r.transform), t);
  write_json(nlohmann::json(r.vae), v);
  write_loss_trace(r.loss_trace, l);
}

void cmd_generate(const RunConfig& cfg) {
  const fs::path out = synthetic_path(cfg);
  guard_outputs({out}, cfg.force);
  FitResult fit;
  fit.transform = read_json(transform_path(cfg)).get<transform::TransformModel>();
  fit.vae = read_json(vae_path(cfg)).get<vae::VaeModel>();
  std::optional<Dataset> original;
  std::size_t n_orig = cfg.generate.n;
  if (cfg.generate.mode == vae::GenerationMode::posterior || n_orig == 0) {
    original = load_data(cfg);
    if (n_orig == 0) n_orig = original->rows();
  }
  const Dataset syn = generate_synthetic(fit, cfg, n_orig, original ? &*original : nullptr);
  ensure_parent(out);
  save_csv(syn, out);
}

void cmd_evaluate(const RunConfig& cfg) {
  const Schema schema = load_schema(schema_path(cfg));
  const fs::path report = cfg.paths.out_dir / "report.json";
  auto outputs = variant_outputs(cfg.paths.out_dir, schema);
  std::vector<fs::path> guarded{report};
  for (const auto& p : outputs) {
    if (p.parent_path().filename() == "marginals") guarded.push_back(p);
  }
  guard_outputs(guarded, cfg.force);
  const Dataset original = load_csv(data_path(cfg), schema);
  const Dataset synthetic = load_csv(synthetic_path(cfg), schema);
  const auto r = evaluate(original, synthetic, cfg);
  fs::create_directories(cfg.paths.out_dir);
  write_json(nlohmann::json(r), report);
  eval::write_marginal_csvs(r.marginals, cfg.paths.out_dir / "marginals");
}

PipelineSummary cmd_pipeline(const RunConfig& cfg) {
  const fs::path dir = cfg.paths.out_dir;
  const bool simulate = cfg.paths.data.empty();
  Dataset data;
  Schema schema;
  if (simulate) {
    schema = cfg.sim.schema();
  } else {
    schema = load_schema(schema_path(cfg));
  }
  std::vector<fs::path> outputs{dir / "run_config.json"};
  if (simulate) {
    outputs.push_back(dir / "data.csv");
    outputs.push_back(dir / "schema.json");
    outputs.push_back(dir / "sim_config.json");
  }
  for (const char* name : {"ptvae", "vae"}) {
    for (auto& p : variant_outputs(dir / name, schema)) outputs.push_back(std::move(p));
  }
  guard_outputs(outputs, cfg.force);

  if (simulate) {
    RunConfig sc = cfg;
    sc.force = true;
    cmd_simulate(sc);
  }
  data = load_csv(data_path(cfg), schema);
  fs::create_directories(dir);
  write_json(nlohmann::json(cfg), dir / "run_config.json");

  PipelineSummary s;
  const auto pt = run_variant(data, cfg, transform::TransformMode::full);
  write_variant(pt, dir / "ptvae");
  s.ptvae = pt.report;
  const auto base = run_variant(data, cfg, transform::TransformMode::standardize_only);
  write_variant(base, dir / "vae");
  s.vae = base.report;
  return s;
}

// ---- file helpers --------------------------------------------------------------

void write_loss_trace(const std::vector<double>& trace, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) f << e + 1 << ',' << format_double(trace[e]) << '\n';
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace ptvae::pipeline
