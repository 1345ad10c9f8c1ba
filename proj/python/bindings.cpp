#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpsm/correlation.hpp"
#include "gpsm/dataset.hpp"
#include "gpsm/mnlogit.hpp"
#include "gpsm/pipeline.hpp"
#include "gpsm/report.hpp"
#include "gpsm/simlab.hpp"

namespace py = pybind11;
using namespace gpsm;

namespace {

std::vector<GpsModelSpec> to_specs(const std::vector<std::pair<std::string, std::vector<int>>>& candidates) {
  std::vector<GpsModelSpec> specs;
  for (const auto& [name, cols] : candidates) specs.push_back({name, cols});
  return specs;
}

}  // namespace

PYBIND11_MODULE(_gpsm, m) {
  m.doc() = "GPS matching with outcome-adjusted model selection";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Eigen::VectorXd y, std::vector<int> w, Eigen::MatrixXd x, std::vector<std::string> names,
                       int t) { return make_dataset(std::move(y), std::move(w), std::move(x), std::move(names), t); }),
           py::arg("y"), py::arg("w"), py::arg("x"), py::arg("names"), py::arg("t"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("d", &Dataset::d)
      .def_readonly("t", &Dataset::t)
      .def_readonly("y", &Dataset::y)
      .def_readonly("w", &Dataset::w)
      .def_readonly("x", &Dataset::x)
      .def_readonly("names", &Dataset::names)
      .def("arm_size", &Dataset::arm_size)
      .def("__repr__", [](const Dataset& ds) {
        return "<Dataset n=" + std::to_string(ds.n()) + " d=" + std::to_string(ds.d()) + " t=" + std::to_string(ds.t) +
               ">";
      });

  m.def("standardize", &standardize, py::arg("ds"));

  m.def(
      "ball_cov", [](std::vector<double> x, std::vector<double> y) { return ball_cov(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "ball_cor", [](std::vector<double> x, std::vector<double> y) { return ball_cor(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "ball_test",
      [](std::vector<double> x, std::vector<double> y, int permutations, std::uint64_t seed) {
        return ball_test(x, y, permutations, seed);
      },
      py::arg("x"), py::arg("y"), py::arg("permutations") = 199, py::arg("seed") = 0);

  m.def(
      "fit_json",
      [](const Dataset& ds, const std::string& name, const std::vector<int>& covariates) {
        const GpsModelSpec spec{name, covariates};
        validate_spec(spec, ds.d());
        return fit_json(fit(ds, spec), ds);
      },
      py::arg("ds"), py::arg("name"), py::arg("covariates"));

  m.def(
      "fit_gps",
      [](const Dataset& ds, const std::vector<int>& covariates) {
        const GpsModelSpec spec{"model", covariates};
        validate_spec(spec, ds.d());
        const FittedGps f = fit(ds, spec);
        py::dict out;
        out["beta"] = f.beta;
        out["gps"] = f.gps;
        out["vcov"] = f.vcov;
        out["loglik"] = f.loglik;
        out["converged"] = f.converged;
        out["iterations"] = f.iterations;
        return out;
      },
      py::arg("ds"), py::arg("covariates"));

  m.def(
      "select_json",
      [](const Dataset& ds, const std::vector<std::pair<std::string, std::vector<int>>>& candidates,
         const std::string& measure, int permutations, double alpha, std::optional<double> delta, int l_sigma,
         int l_cov, std::uint64_t seed, unsigned threads, bool standardize) {
        PipelineOptions opts;
        opts.measure = parse_measure(measure);
        opts.permutations = permutations;
        opts.alpha = alpha;
        opts.delta = delta;
        opts.variance = {l_sigma, l_cov};
        opts.seed = seed;
        opts.threads = threads;
        opts.standardize = standardize;
        SelectionResult r;
        {
          py::gil_scoped_release release;
          r = run(ds, to_specs(candidates), opts);
        }
        return selection_json(r);
      },
      py::arg("ds"), py::arg("candidates"), py::arg("measure") = "OABM_OLS", py::arg("permutations") = 199,
      py::arg("alpha") = 0.05, py::arg("delta") = py::none(), py::arg("l_sigma") = 1, py::arg("l_cov") = 2,
      py::arg("seed") = 0, py::arg("threads") = 1, py::arg("standardize") = true);

  m.def(
      "simulate_json",
      [](double u, double v, const std::string& outcome, int n_per_arm, int replicates,
         const std::vector<std::string>& measures, bool evaluate_models, int permutations, std::uint64_t seed,
         unsigned threads) {
        Scenario sc;
        sc.u = u;
        sc.v = v;
        sc.outcome = parse_outcome_form(outcome);
        sc.n_per_arm = n_per_arm;
        sc.replicates = replicates;
        sc.measures.clear();
        for (const auto& name : measures) sc.measures.push_back(parse_measure(name));
        sc.evaluate_models = evaluate_models;
        sc.pipeline.permutations = permutations;
        sc.base_seed = seed;
        sc.threads = threads;
        SimResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(sc);
        }
        return simulation_json(r);
      },
      py::arg("u") = 2.0, py::arg("v") = 2.0, py::arg("outcome") = "linear", py::arg("n_per_arm") = 500,
      py::arg("replicates") = 200, py::arg("measures") = std::vector<std::string>{"AMD", "OABM_OLS"},
      py::arg("evaluate_models") = true, py::arg("permutations") = 199, py::arg("seed") = 0,
      py::arg("threads") = 1);

  m.def(
      "generate",
      [](double u, double v, const std::string& outcome, int n_per_arm, std::uint64_t seed, int rep) {
        Scenario sc;
        sc.u = u;
        sc.v = v;
        sc.outcome = parse_outcome_form(outcome);
        sc.n_per_arm = n_per_arm;
        sc.base_seed = seed;
        return generate(sc, rep);
      },
      py::arg("u") = 2.0, py::arg("v") = 2.0, py::arg("outcome") = "linear", py::arg("n_per_arm") = 500,
      py::arg("seed") = 0, py::arg("rep") = 0);

  m.attr("MEASURES") = [] {
    std::vector<std::string> names;
    for (Measure x : kAllMeasures) names.push_back(to_string(x));
    return names;
  }();
}
