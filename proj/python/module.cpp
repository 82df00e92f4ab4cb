#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ptvae/pipeline.hpp"

namespace py = pybind11;
using namespace ptvae;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> as_span(const Array& a) {
  if (a.ndim() != 1) throw Error("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Schema schema_from(const std::vector<std::pair<std::string, std::string>>& spec) {
  Schema s;
  for (const auto& [name, kind] : spec) s.push_back({name, column_kind_from_string(kind)});
  return s;
}

Dataset dataset_from_matrix(const std::vector<std::pair<std::string, std::string>>& spec, const Array& m) {
  if (m.ndim() != 2) throw Error("expected a 2-d array of shape (rows, columns)");
  const auto r = static_cast<std::size_t>(m.shape(0));
  const auto c = static_cast<std::size_t>(m.shape(1));
  if (c != spec.size()) throw Error("array has " + std::to_string(c) + " columns, schema has " +
                                    std::to_string(spec.size()));
  std::vector<std::vector<double>> cols(c, std::vector<double>(r));
  auto v = m.unchecked<2>();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) cols[j][i] = v(i, j);
  }
  Dataset d(schema_from(spec), std::move(cols));
  d.validate();
  return d;
}

py::array_t<double> dataset_to_matrix(const Dataset& d) {
  py::array_t<double> out({d.rows(), d.cols()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) v(i, j) = d.at(i, j);
  }
  return out;
}

transform::TransformMode mode_from(const std::string& s) {
  if (s == "full") return transform::TransformMode::full;
  if (s == "standardize_only") return transform::TransformMode::standardize_only;
  throw Error("unknown transform mode '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_ptvae, m) {
  m.doc() = "Power-transformed VAE for mixed-type tabular data";

  py::register_exception<Error>(m, "PtvaeError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_matrix), py::arg("schema"), py::arg("values"),
           "schema: list of (name, kind) with kind in {continuous, binary, integer}; values: (rows, columns)")
      .def_property_readonly("rows", &Dataset::rows)
      .def_property_readonly("cols", &Dataset::cols)
      .def_property_readonly("schema",
                             [](const Dataset& d) {
                               std::vector<std::pair<std::string, std::string>> s;
                               for (const auto& c : d.schema()) s.emplace_back(c.name, to_string(c.kind));
                               return s;
                             })
      .def("column", [](const Dataset& d, const std::string& name) {
        return to_array(d.column_vector(d.column_index(name)));
      })
      .def("to_numpy", &dataset_to_matrix)
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; })
      .def("__repr__", [](const Dataset& d) {
        return "<Dataset " + std::to_string(d.rows()) + "x" + std::to_string(d.cols()) + ">";
      });

  m.def("load_csv", [](const std::filesystem::path& csv, const std::filesystem::path& schema) {
    return load_csv(csv, load_schema(schema));
  }, py::arg("csv"), py::arg("schema"));
  m.def("save_csv", [](const Dataset& d, const std::filesystem::path& path) { save_csv(d, path); },
        py::arg("data"), py::arg("path"));

  m.def("boxcox_forward", [](const Array& y, double l1, double l2) {
    return to_array(transform::boxcox_forward(as_span(y), {l1, l2}));
  }, py::arg("y"), py::arg("lambda1"), py::arg("lambda2"));
  m.def("boxcox_inverse", [](const Array& t, double l1, double l2) {
    return to_array(transform::boxcox_inverse(as_span(t), {l1, l2}));
  }, py::arg("t"), py::arg("lambda1"), py::arg("lambda2"));
  m.def("fit_lambda2", [](const Array& y) { return transform::fit_lambda2(as_span(y)); }, py::arg("y"));
  m.def("fit_lambda1", [](const Array& y, double l2) { return transform::fit_lambda1(as_span(y), l2).lambda1; },
        py::arg("y"), py::arg("lambda2"));

  py::class_<transform::PowerParams>(m, "PowerParams")
      .def(py::init([](double alpha, double beta1, double beta2, double rho) {
             return transform::PowerParams{alpha, beta1, beta2, rho};
           }),
           py::arg("alpha") = 0.0, py::arg("beta1") = -1.0, py::arg("beta2") = 1.0, py::arg("rho") = 1.0)
      .def_readwrite("alpha", &transform::PowerParams::alpha)
      .def_readwrite("beta1", &transform::PowerParams::beta1)
      .def_readwrite("beta2", &transform::PowerParams::beta2)
      .def_readwrite("rho", &transform::PowerParams::rho)
      .def("__repr__", [](const transform::PowerParams& p) {
        return "PowerParams(alpha=" + format_double(p.alpha) + ", beta1=" + format_double(p.beta1) +
               ", beta2=" + format_double(p.beta2) + ", rho=" + format_double(p.rho) + ")";
      });

  m.def("power_forward", [](const Array& x, const transform::PowerParams& p) {
    return to_array(transform::power_forward(as_span(x), p));
  }, py::arg("x"), py::arg("params"));
  m.def("power_inverse", [](const Array& t, const transform::PowerParams& p) {
    return to_array(transform::power_inverse(as_span(t), p));
  }, py::arg("t"), py::arg("params"));
  m.def("fit_power_params", [](const Array& x) { return transform::fit_power_params(as_span(x)).params; },
        py::arg("x"));
  m.def("two_sigma_criterion", [](const Array& x) { return transform::two_sigma_criterion(as_span(x)); },
        py::arg("x"));
  m.def("bimodality_coefficient", [](const Array& x) { return transform::bimodality_coefficient(as_span(x)); },
        py::arg("x"));

  py::class_<transform::TransformModel>(m, "TransformModel")
      .def("forward", [](const transform::TransformModel& t, const Dataset& d) { return transform::apply_forward(d, t); })
      .def("inverse", [](const transform::TransformModel& t, const Dataset& d) { return transform::apply_inverse(d, t); })
      .def("to_dict", [](const transform::TransformModel& t) { return to_python(nlohmann::json(t)); })
      .def_static("from_dict", [](const py::object& o) { return from_python(o).get<transform::TransformModel>(); });
  m.def("fit_transform", [](const Dataset& d, const std::string& mode) {
    return mode_from(mode) == transform::TransformMode::full ? transform::fit_transform_model(d)
                                                             : transform::fit_standardize_only(d);
  }, py::arg("data"), py::arg("mode") = "full");

  m.def("kl_gauss", [](const vae::Vector& mu, const vae::Vector& sigma) { return vae::kl_gauss(mu, sigma); },
        py::arg("mu"), py::arg("sigma"));

  py::class_<vae::VaeModel>(m, "VaeModel")
      .def("to_dict", [](const vae::VaeModel& v) { return to_python(nlohmann::json(v)); })
      .def_static("from_dict", [](const py::object& o) { return from_python(o).get<vae::VaeModel>(); });
  m.def("train_vae", [](const Dataset& d, int epochs, int batch_size, double learning_rate, std::uint64_t seed,
                        Eigen::Index hidden_dim, Eigen::Index latent_dim) {
    vae::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.seed = seed;
    auto r = vae::train(d, vae::make_architecture(d.schema(), hidden_dim, latent_dim), c);
    return py::make_tuple(std::move(r.model), r.loss_trace);
  }, py::arg("data"), py::arg("epochs") = 100, py::arg("batch_size") = 50, py::arg("learning_rate") = 0.01,
     py::arg("seed") = 1, py::arg("hidden_dim") = 0, py::arg("latent_dim") = 3,
     "Train on data already in transformed space; returns (model, loss_trace).");
  m.def("synthesize", [](const transform::TransformModel& t, const vae::VaeModel& v, std::size_t n,
                         std::uint64_t seed, const std::string& mode, const Dataset* original) {
    return vae::synthesize(t, v, n, vae::generation_mode_from_string(mode), seed, original);
  }, py::arg("transform"), py::arg("vae"), py::arg("n"), py::arg("seed") = 1, py::arg("mode") = "prior",
     py::arg("original") = nullptr);

  m.def("default_sim_config", [] { return to_python(nlohmann::json(sim::default_config())); });
  m.def("simulate", [](std::uint64_t seed, std::size_t n, const py::object& config) {
    auto c = config.is_none() ? sim::default_config() : from_python(config).get<sim::SimConfig>();
    c.seed = seed;
    if (n > 0) c.n = n;
    return sim::generate_benchmark(c);
  }, py::arg("seed") = 1, py::arg("n") = 0, py::arg("config") = py::none());

  m.def("pmse_ratio", [](const Dataset& orig, const Dataset& syn, std::size_t n_perm, std::uint64_t seed,
                         std::size_t min_leaf, std::size_t max_depth) {
    return to_python(nlohmann::json(eval::pmse_ratio(orig, syn, {min_leaf, max_depth}, n_perm, seed)));
  }, py::arg("original"), py::arg("synthetic"), py::arg("n_perm") = 100, py::arg("seed") = 1,
     py::arg("min_leaf") = 20, py::arg("max_depth") = 25);

  m.def("run_pipeline", [](const py::object& config, const std::filesystem::path& out_dir, std::uint64_t seed,
                           bool force) {
    auto c = config.is_none() ? pipeline::RunConfig{} : from_python(config).get<pipeline::RunConfig>();
    c.paths.out_dir = out_dir;
    c.seed = seed;
    c.force = force;
    const auto s = pipeline::cmd_pipeline(c);
    py::dict out;
    out["ptvae"] = to_python(nlohmann::json(s.ptvae));
    out["vae"] = to_python(nlohmann::json(s.vae));
    return out;
  }, py::arg("config") = py::none(), py::arg("out_dir") = "out", py::arg("seed") = 1, py::arg("force") = false);
}
