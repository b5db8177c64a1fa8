#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wdsub/bellman.hpp"
#include "wdsub/certify.hpp"
#include "wdsub/experiments.hpp"
#include "wdsub/martingale.hpp"
#include "wdsub/weights.hpp"

namespace py = pybind11;
using namespace wdsub;

namespace {

void bind_bellman(py::module_& m) {
    py::class_<Coefficients>(m, "Coefficients")
        .def(py::init<>())
        .def_readwrite("c1", &Coefficients::c1)
        .def_readwrite("c2", &Coefficients::c2)
        .def_readwrite("c3", &Coefficients::c3)
        .def_readwrite("c7", &Coefficients::c7);

    py::class_<BellmanConfig>(m, "BellmanConfig")
        .def(py::init<>())
        .def(py::init([](double Q, double eps, double ell, int dim) {
                 BellmanConfig c;
                 c.Q = Q;
                 c.eps = eps;
                 c.ell = ell;
                 c.dim = dim;
                 c.validate();
                 return c;
             }),
             py::arg("Q") = 16.0, py::arg("eps") = 0.1, py::arg("ell") = 0.05, py::arg("dim") = 2)
        .def_readwrite("Q", &BellmanConfig::Q)
        .def_readwrite("eps", &BellmanConfig::eps)
        .def_readwrite("ell", &BellmanConfig::ell)
        .def_readwrite("dim", &BellmanConfig::dim)
        .def_readwrite("coeffs", &BellmanConfig::coeffs)
        .def("validate", &BellmanConfig::validate);

    py::class_<StatePoint>(m, "StatePoint")
        .def(py::init([](std::vector<double> x, std::vector<double> y, double r, double s) {
                 return StatePoint{std::move(x), std::move(y), r, s};
             }),
             py::arg("x"), py::arg("y"), py::arg("r"), py::arg("s"))
        .def_readwrite("x", &StatePoint::x)
        .def_readwrite("y", &StatePoint::y)
        .def_readwrite("r", &StatePoint::r)
        .def_readwrite("s", &StatePoint::s);

    py::enum_<Region>(m, "Region")
        .value("R1", Region::R1)
        .value("R2", Region::R2)
        .value("R3", Region::R3)
        .value("Cut", Region::Cut);

    m.def("default_coefficients", &default_coefficients);
    m.def("eval_K", &eval_K, py::arg("r"), py::arg("s"), py::arg("Q"));
    m.def("eval_H4", &eval_H4, py::arg("norm_x"), py::arg("norm_y"), py::arg("r"), py::arg("s"), py::arg("K"));
    m.def("classify_region", &classify_region);
    m.def("bellman_value", &bellman_value, py::arg("v"), py::arg("cfg"));
    m.def("bellman_gradient", &bellman_gradient, py::arg("v"), py::arg("cfg"));
    m.def("region_of", &region_of, py::arg("v"), py::arg("cfg"));
}

void bind_certify(py::module_& m) {
    py::class_<SampleSpec>(m, "SampleSpec")
        .def(py::init<>())
        .def_readwrite("count", &SampleSpec::count)
        .def_readwrite("seed", &SampleSpec::seed)
        .def_readwrite("Q", &SampleSpec::Q)
        .def_readwrite("eps", &SampleSpec::eps)
        .def_readwrite("ell", &SampleSpec::ell)
        .def_readwrite("dim", &SampleSpec::dim);

    py::class_<TauResult>(m, "TauResult")
        .def_readonly("tau", &TauResult::tau)
        .def_readonly("mu", &TauResult::mu)
        .def_readonly("exact_margin", &TauResult::exact_margin)
        .def_readonly("success", &TauResult::success)
        .def_readonly("within_bounds", &TauResult::within_bounds);

    py::class_<CheckResult>(m, "CheckResult")
        .def_readonly("name", &CheckResult::name)
        .def_readonly("samples", &CheckResult::samples)
        .def_readonly("skipped", &CheckResult::skipped)
        .def_readonly("min_margin", &CheckResult::min_margin)
        .def_readonly("passed", &CheckResult::pass);

    py::class_<CertReport>(m, "CertReport")
        .def_readonly("checks", &CertReport::checks)
        .def_readonly("passed", &CertReport::pass)
        .def_readonly("no_samples", &CertReport::no_samples)
        .def("to_text", [](const CertReport& r) { return to_structured_text(r); })
        .def("to_csv", [](const CertReport& r) { return to_csv(r); });

    m.def("extract_tau", &extract_tau, py::arg("v"), py::arg("cfg"), py::arg("rng_seed") = 0);
    m.def(
        "run_certification",
        [](const BellmanConfig& cfg, const SampleSpec& spec, int jobs, std::size_t cut_points) {
            CertOptions opt;
            opt.jobs = jobs;
            opt.cut_points = cut_points;
            py::gil_scoped_release release;
            return run_certification(cfg, spec, opt);
        },
        py::arg("cfg"), py::arg("spec"), py::arg("jobs") = 0, py::arg("cut_points") = 1000);
}

void bind_weights(py::module_& m) {
    py::class_<WeightTree>(m, "WeightTree")
        .def(py::init<int, std::vector<double>>(), py::arg("depth"), py::arg("leaves"))
        .def_property_readonly("depth", &WeightTree::depth)
        .def_property_readonly("leaves", &WeightTree::leaves)
        .def("avg_w", &WeightTree::avg_w)
        .def("avg_u", &WeightTree::avg_u)
        .def("to_text", [](const WeightTree& w) { return to_text(w); });

    m.def("a2_characteristic", &a2_characteristic);
    m.def("truncate_above", &truncate_above, py::arg("w"), py::arg("a"));
    m.def("truncate_two_sided", &truncate_two_sided, py::arg("w"), py::arg("a"));
    m.def("power_weight_family", &power_weight_family, py::arg("delta"), py::arg("depth"));
    m.def("parse_weight", &parse_weight);
}

void bind_martingale(py::module_& m) {
    py::class_<DyadicMartingale>(m, "DyadicMartingale")
        .def_static("from_leaves", &DyadicMartingale::from_leaves, py::arg("depth"), py::arg("dim"), py::arg("leaves"))
        .def_property_readonly("depth", &DyadicMartingale::depth)
        .def_property_readonly("dim", &DyadicMartingale::dim)
        .def("value", &DyadicMartingale::value_vector)
        .def("leaves", &DyadicMartingale::leaves)
        .def("to_text", [](const DyadicMartingale& x) { return to_text(x); });

    m.def("random_martingale", [](int depth, int dim, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return random_martingale(depth, dim, rng);
    });
    m.def("transform", &transform, py::arg("x"), py::arg("sigma"));
    m.def("rotate_increments", [](const DyadicMartingale& x, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return rotate_increments(x, rng);
    });
    m.def("is_subordinate", [](const DyadicMartingale& x, const DyadicMartingale& y) {
        return check_subordination(x, y).subordinate;
    });
    m.def("weighted_norm", &weighted_norm);
    m.def("increment_product", &increment_product);

    py::class_<TelescopeResult>(m, "TelescopeResult")
        .def_readonly("lhs", &TelescopeResult::lhs)
        .def_readonly("sum_increments", &TelescopeResult::sum_increments)
        .def_readonly("bellman_bound", &TelescopeResult::bellman_bound)
        .def_readonly("min_margin", &TelescopeResult::min_margin)
        .def_readonly("per_step_margins", &TelescopeResult::per_step_margins)
        .def_readonly("max_linear_residual", &TelescopeResult::max_linear_residual)
        .def_readonly("passed", &TelescopeResult::pass);
    m.def(
        "bellman_telescope",
        [](const DyadicMartingale& x, const DyadicMartingale& z, const WeightTree& w, const BellmanConfig& cfg,
           double a) {
            TelescopeOptions opt;
            opt.a = a;
            return bellman_telescope(x, z, w, cfg, opt);
        },
        py::arg("x"), py::arg("z"), py::arg("w"), py::arg("cfg"), py::arg("a") = 0.0);

    py::class_<MainTheoremResult>(m, "MainTheoremResult")
        .def_readonly("lhs", &MainTheoremResult::lhs)
        .def_readonly("rhs", &MainTheoremResult::rhs)
        .def_readonly("ratio", &MainTheoremResult::ratio)
        .def_readonly("Q2", &MainTheoremResult::Q2)
        .def_readonly("duality_gap", &MainTheoremResult::duality_gap)
        .def_readonly("passed", &MainTheoremResult::pass);
    m.def("verify_main_theorem", &verify_main_theorem, py::arg("x"), py::arg("y"), py::arg("w"),
          py::arg("C_target") = kDefaultCTarget, py::arg("seed") = 1, py::arg("test_functions") = 16);

    py::class_<SharpnessRow>(m, "SharpnessRow")
        .def_readonly("delta", &SharpnessRow::delta)
        .def_readonly("depth", &SharpnessRow::depth)
        .def_readonly("Q2", &SharpnessRow::Q2)
        .def_readonly("worst_ratio", &SharpnessRow::worst_ratio);
    py::class_<SharpnessResult>(m, "SharpnessResult")
        .def_readonly("rows", &SharpnessResult::rows)
        .def_readonly("slope", &SharpnessResult::slope)
        .def_readonly("max_ratio_over_Q2", &SharpnessResult::max_ratio_over_Q2);
    m.def(
        "sharpness_experiment",
        [](const std::vector<double>& grid, int depth, int restarts, std::uint64_t seed, int jobs) {
            SharpnessOptions opt;
            opt.restarts = restarts;
            opt.seed = seed;
            opt.jobs = jobs;
            py::gil_scoped_release release;
            return sharpness_experiment(grid, depth, opt);
        },
        py::arg("delta_grid"), py::arg("depth"), py::arg("restarts") = 32, py::arg("seed") = 1, py::arg("jobs") = 0);
    m.def("deltas_for_characteristic", &deltas_for_characteristic);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Weighted estimates for differentially subordinate martingales";
    m.attr("DEFAULT_C_TARGET") = kDefaultCTarget;
    bind_bellman(m);
    bind_certify(m);
    bind_weights(m);
    bind_martingale(m);
}
