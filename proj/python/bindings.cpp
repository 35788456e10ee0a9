#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "difflab/diffusion.hpp"
#include "difflab/errors.hpp"
#include "difflab/estimation.hpp"
#include "difflab/lab.hpp"
#include "difflab/metrics.hpp"
#include "difflab/mixture.hpp"
#include "difflab/parallel.hpp"
#include "difflab/sampler.hpp"
#include "difflab/schedule.hpp"

namespace py = pybind11;
using namespace difflab;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix to_matrix(const Points& points, int dim) {
  RowMatrix m(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return m;
}

Schedule build_schedule(const std::string& kind, double T, double gamma, std::size_t N) {
  return make_schedule(schedule_kind_from_string(kind), T, gamma, N);
}

}  // namespace

PYBIND11_MODULE(_difflab, m) {
  m.doc() = "Gaussian-mixture diffusion laboratory";
  m.attr("__version__") = DIFFLAB_VERSION;

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ScheduleError>(m, "ScheduleError", PyExc_RuntimeError);
  py::register_exception<SamplerError>(m, "SamplerError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Mixture>(m, "Mixture")
      .def(py::init(&Mixture::from_weights), py::arg("weights"), py::arg("means"), py::arg("variances"))
      .def_static("from_json", [](const std::string& text) { return mixture_from_json(nlohmann::json::parse(text)); })
      .def("to_json", [](const Mixture& g) { return nlohmann::json(g).dump(); })
      .def_property_readonly("dim", &Mixture::dim)
      .def_property_readonly("size", &Mixture::size)
      .def_property_readonly("weights",
                             [](const Mixture& g) {
                               std::vector<double> w;
                               for (const auto& c : g.components()) w.push_back(c.weight());
                               return w;
                             })
      .def("second_moment", &Mixture::second_moment)
      .def("min_variance", &Mixture::min_variance)
      .def("log_density", [](const Mixture& g, const Vector& x) { return log_density(g, x); })
      .def("score", [](const Mixture& g, const Vector& x) { return score(g, x); })
      .def("score_jacobian", [](const Mixture& g, const Vector& x) { return score_jacobian(g, x); })
      .def("responsibilities", [](const Mixture& g, const Vector& x) { return responsibilities(g, x); })
      .def("smooth", [](const Mixture& g, double t) { return smooth(g, t); })
      .def(
          "sample",
          [](const Mixture& g, std::size_t n, std::uint64_t seed) {
            Stream rng(seed);
            return to_matrix(sample(g, rng, n), g.dim());
          },
          py::arg("n"), py::arg("seed") = 0)
      .def("__repr__", [](const Mixture& g) {
        return "<Mixture dim=" + std::to_string(g.dim()) + " components=" + std::to_string(g.size()) + ">";
      });

  m.def("standard_normal", &standard_normal, py::arg("dim") = 1);
  m.def("single_gaussian", &single_gaussian, py::arg("rho"), py::arg("dim") = 1);
  m.def("two_gaussian", &two_gaussian, py::arg("R"), py::arg("rho"));
  m.def("sigma_sq", &sigma_sq, py::arg("t"));

  m.def(
      "schedule_times",
      [](const std::string& kind, double T, double gamma, std::size_t N) {
        return build_schedule(kind, T, gamma, N).times();
      },
      py::arg("kind"), py::arg("T"), py::arg("gamma"), py::arg("N"));
  m.def(
      "kl_budget",
      [](const std::string& kind, double T, double gamma, std::size_t N) {
        return kl_budget(build_schedule(kind, T, gamma, N));
      },
      py::arg("kind"), py::arg("T"), py::arg("gamma"), py::arg("N"));

  m.def(
      "ddpm_step",
      [](const Vector& x, const Vector& s_hat, double h) {
        const StepResult r = ddpm_step(x, s_hat, h);
        return py::make_tuple(r.mean, r.noise_std);
      },
      py::arg("x"), py::arg("s_hat"), py::arg("h"));

  m.def(
      "run_sampler",
      [](const Mixture& q0, const std::string& kind, double T, double gamma, std::size_t N, std::size_t n,
         std::uint64_t seed, const std::string& init) {
        const AnalyticScore model(q0);
        SamplerOptions options;
        options.n = n;
        options.seed = seed;
        options.init = init_from_string(init);
        if (options.init == Init::exact_qT) options.q0 = q0;
        const SamplerOutput out = [&] {
          py::gil_scoped_release release;
          return run_sampler(build_schedule(kind, T, gamma, N), model, options);
        }();
        return py::make_tuple(to_matrix(out.samples, q0.dim()), out.terminal_time());
      },
      py::arg("q0"), py::arg("kind") = "adaptive", py::arg("T") = 1.0, py::arg("gamma") = 0.02,
      py::arg("N") = 100, py::arg("n") = 1000, py::arg("seed") = 0, py::arg("init") = "standard_normal",
      "Reverse sampler driven by the exact score of q0; returns (samples, terminal_time).");

  m.def(
      "score_matching_loss",
      [](const Mixture& model, const Mixture& q0, double t, std::size_t m, std::uint64_t seed) {
        Stream rng(seed);
        const Batch batch = paired_batch(q0, t, m, rng);
        return score_matching_loss(MixtureScore(smooth(model, t), "model"), batch);
      },
      py::arg("model"), py::arg("q0"), py::arg("t"), py::arg("m"), py::arg("seed") = 0,
      "Empirical loss at time t of the exact score of smooth(model, t) on a batch drawn from q0.");

  m.def(
      "tv_quadrature_1d", [](const Mixture& p, const Mixture& q) { return tv_quadrature_1d(p, q).value; },
      py::arg("p"), py::arg("q"));
  m.def(
      "w2_empirical_1d",
      [](const std::vector<double>& a, const std::vector<double>& b) { return w2_empirical_1d(a, b).value; },
      py::arg("a"), py::arg("b"));
  m.def(
      "endpoint_bounds",
      [](const Mixture& q0, double gamma, double T) {
        const EndpointBounds b = endpoint_bounds(q0, gamma, T);
        return py::make_tuple(b.w2_bound, b.tv_bound);
      },
      py::arg("q0"), py::arg("gamma"), py::arg("T"));

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);

  m.def(
      "resolve_config",
      [](const std::string& raw) { return nlohmann::json(resolve_config(nlohmann::json::parse(raw))).dump(); },
      py::arg("config_json"));
  m.def(
      "run_experiment",
      [](const std::string& raw) {
        const ExperimentConfig config = resolve_config(nlohmann::json::parse(raw));
        const ExperimentResult r = [&] {
          py::gil_scoped_release release;
          return run_experiment(config);
        }();
        return py::make_tuple(r.rows.to_csv(), r.summary.dump(), r.within_policy);
      },
      py::arg("config_json"), "Returns (rows_csv, summary_json, within_policy).");
  m.def(
      "run_and_write",
      [](const std::string& raw, const std::string& out_root, std::optional<std::string> tag) {
        const ExperimentConfig config = resolve_config(nlohmann::json::parse(raw));
        py::gil_scoped_release release;
        return run_and_write(config, out_root, tag).directory.string();
      },
      py::arg("config_json"), py::arg("out_root"), py::arg("tag") = std::nullopt);
  m.def(
      "replay_manifest",
      [](const std::string& path) {
        py::gil_scoped_release release;
        return replay_manifest(path).identical;
      },
      py::arg("manifest_path"));
}
