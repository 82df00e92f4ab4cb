#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ptvae/pipeline.hpp"

using namespace ptvae;
using namespace ptvae::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(f, line)) ++n;
  return n;
}

RunConfig small_config(const fs::path& dir) {
  RunConfig c;
  c.paths.out_dir = dir;
  c.sim.n = 300;
  c.train.epochs = 4;
  c.transform.power.outer_rounds = 1;
  c.transform.power.epochs = 20;
  c.evaluate.n_perm = 4;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("simulate writes the benchmark and refuses to overwrite") {
  TempDir tmp("ptvae_test_sim");
  auto c = small_config(tmp.path);
  c.sim.n = 2500;
  cmd_simulate(c);
  CHECK(line_count(tmp.path / "data.csv") == 2501);
  const auto d = load_csv(tmp.path / "data.csv", load_schema(tmp.path / "schema.json"));
  CHECK(d.cols() == 21);
  const auto first = slurp(tmp.path / "data.csv");
  CHECK_THROWS_AS(cmd_simulate(c), Error);
  c.force = true;
  cmd_simulate(c);
  CHECK(slurp(tmp.path / "data.csv") == first);
}

TEST_CASE("fit, generate and evaluate produce their artifacts") {
  TempDir tmp("ptvae_test_stages");
  auto c = small_config(tmp.path);
  cmd_simulate(c);
  cmd_fit(c);
  const auto tm = read_json(tmp.path / "transform_model.json");
  CHECK(tm["columns"].size() == 9);
  CHECK(line_count(tmp.path / "loss_trace.csv") == 1 + 4);
  const auto model_bytes = slurp(tmp.path / "vae_model.json");
  c.force = true;
  cmd_fit(c);
  CHECK(slurp(tmp.path / "vae_model.json") == model_bytes);

  c.generate.n = 77;
  CHECK(c.generate.mode == vae::GenerationMode::prior);
  cmd_generate(c);
  const auto schema = load_schema(tmp.path / "schema.json");
  const auto syn = load_csv(tmp.path / "synthetic.csv", schema);
  CHECK(syn.rows() == 77);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].kind != ColumnKind::binary) continue;
    for (double v : syn.column(j)) CHECK((v == 0.0 || v == 1.0));
  }
  c.generate.mode = vae::GenerationMode::posterior;
  cmd_generate(c);
  CHECK(load_csv(tmp.path / "synthetic.csv", schema).rows() == 77);

  cmd_evaluate(c);
  const auto rep = read_json(tmp.path / "report.json");
  for (const char* key : {"pmse", "null_mean", "null_sd", "pmse_ratio"}) CHECK(rep.contains(key));
  std::size_t n_csv = 0;
  for (const auto& e : fs::directory_iterator(tmp.path / "marginals")) n_csv += e.path().extension() == ".csv";
  CHECK(n_csv == 21);
}

TEST_CASE("data evaluated against its own shuffled rows looks like the null") {
  auto c = small_config("unused");
  c.sim.n = 1000;
  c.evaluate.n_perm = 20;
  const auto d = sim::generate_benchmark(c.sim);
  std::vector<std::size_t> order(d.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = (i * 7919) % order.size();
  const auto r = evaluate(d, d.select_rows(order), c);
  CHECK(r.pmse_ratio < 1.2);
}

TEST_CASE("pipeline writes paired reports and is reproducible") {
  TempDir a("ptvae_test_pipe_a"), b("ptvae_test_pipe_b");
  const auto s1 = cmd_pipeline(small_config(a.path));
  cmd_pipeline(small_config(b.path));
  CHECK(fs::exists(a.path / "ptvae" / "report.json"));
  CHECK(fs::exists(a.path / "vae" / "report.json"));
  CHECK(s1.ptvae.n_syn == s1.vae.n_syn);
  CHECK(s1.ptvae.n_orig == s1.vae.n_orig);
  for (const char* f : {"data.csv", "ptvae/vae_model.json", "ptvae/transform_model.json", "ptvae/synthetic.csv",
                        "ptvae/report.json", "vae/vae_model.json", "vae/synthetic.csv", "vae/report.json"}) {
    CHECK_MESSAGE(slurp(a.path / f) == slurp(b.path / f), f);
  }
  CHECK(read_json(a.path / "vae" / "transform_model.json")["mode"] == "standardize_only");
  CHECK_THROWS_AS(cmd_pipeline(small_config(a.path)), Error);
}

TEST_CASE("run config json round trip and validation") {
  RunConfig c;
  c.seed = 99;
  c.train.epochs = 7;
  c.generate.mode = vae::GenerationMode::posterior;
  c.evaluate.n_perm = 50;
  const auto back = nlohmann::json(c).get<RunConfig>();
  CHECK(nlohmann::json(back) == nlohmann::json(c));
  CHECK(RunConfig{}.train.batch_size == 50);
  CHECK(RunConfig{}.evaluate.cart.min_leaf == 20);
  CHECK(RunConfig{}.evaluate.cart.max_depth == 25);
  CHECK_THROWS_AS(nlohmann::json({{"evaluate", {{"n_perm", 1}}}}).get<RunConfig>(), Error);
  CHECK_THROWS_AS(nlohmann::json({{"generate", {{"mode", "sideways"}}}}).get<RunConfig>(), Error);
  CHECK(stage_seed(c, Stage::train) != stage_seed(c, Stage::generate));
}

TEST_CASE("cli reports bad input on stderr with a nonzero exit") {
  const std::string cli = PTVAE_CLI_PATH;
  if (cli.empty()) return;
  TempDir tmp("ptvae_test_cli");
  fs::create_directories(tmp.path);
  {
    std::ofstream f(tmp.path / "bad.json");
    f << "{\"evaluate\": {\"n_perm\": 0}}";
  }
  const auto err = tmp.path / "err.txt";
  const std::string cmd = cli + " simulate --config " + (tmp.path / "bad.json").string() + " --out " +
                          tmp.path.string() + " 2> " + err.string();
  CHECK(std::system(cmd.c_str()) != 0);
  const auto msg = slurp(err);
  CHECK(msg.find("n_perm") != std::string::npos);
  CHECK(std::count(msg.begin(), msg.end(), '\n') == 1);

  const std::string ok = cli + " simulate --seed 3 --out " + tmp.path.string() + " 2> " + err.string();
  CHECK(std::system(ok.c_str()) == 0);
  CHECK(std::system(ok.c_str()) != 0);
}
