#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cqfm/baselines.hpp"
#include "cqfm/basis.hpp"
#include "cqfm/error.hpp"
#include "cqfm/factor_count.hpp"
#include "cqfm/qppca.hpp"
#include "cqfm/quantreg.hpp"
#include "cqfm/simulate.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

cqfm::PanelData make_panel(const MatrixXd& Y, const MatrixXd& X) {
  cqfm::PanelData p;
  p.Y = Y;
  p.X = X;
  p.validate();
  return p;
}

cqfm::QuantRegOptions qr_options(double tol, int max_iterations, unsigned threads) {
  cqfm::QuantRegOptions o;
  o.tol = tol;
  o.max_iterations = max_iterations;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(cqfm, m) {
  m.doc() = "Quantile factor models with characteristic-driven loadings";
  m.attr("__version__") = CQFM_VERSION;

  auto base = py::register_exception<cqfm::Error>(m, "Error");
  py::register_exception<cqfm::InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<cqfm::RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<cqfm::NotConverged>(m, "NotConverged", base.ptr());
  py::register_exception<cqfm::DataError>(m, "DataError", base.ptr());
  py::register_exception<cqfm::StageError>(m, "StageError", base.ptr());

  py::class_<cqfm::SieveBasis>(m, "SieveBasis")
      .def(py::init<int, VectorXd, VectorXd>(), "k_n"_a, "lower"_a, "upper"_a)
      .def_property_readonly("k_n", &cqfm::SieveBasis::k_n)
      .def_property_readonly("dimension", &cqfm::SieveBasis::dimension)
      .def_property_readonly("lower", &cqfm::SieveBasis::lower)
      .def_property_readonly("upper", &cqfm::SieveBasis::upper)
      .def("evaluate", &cqfm::SieveBasis::evaluate, "x"_a)
      .def("design_matrix", &cqfm::SieveBasis::design_matrix, "X"_a);
  m.def(
      "fit_basis", [](const MatrixXd& X, int k_n) { return cqfm::fit_basis({X, {}}, k_n); }, "X"_a, "k_n"_a,
      "Chebyshev sieve fitted to the column ranges of X.");
  m.def("default_basis_size", &cqfm::default_basis_size, "n"_a);

  py::class_<cqfm::QuantileFitResult>(m, "QuantileFitResult")
      .def_readonly("a_hat", &cqfm::QuantileFitResult::a_hat)
      .def_readonly("objective", &cqfm::QuantileFitResult::objective)
      .def_readonly("iterations", &cqfm::QuantileFitResult::iterations)
      .def_readonly("kkt_residual", &cqfm::QuantileFitResult::kkt_residual)
      .def_readonly("objective_trace", &cqfm::QuantileFitResult::objective_trace)
      .def_readonly("basis", &cqfm::QuantileFitResult::basis);
  m.def(
      "fit_quantile",
      [](const MatrixXd& Z, const VectorXd& y, double tau, double tol, int max_iterations) {
        return cqfm::fit_quantile(Z, y, tau, qr_options(tol, max_iterations, 1));
      },
      "Z"_a, "y"_a, "tau"_a, "tol"_a = 1e-8, "max_iterations"_a = 500);
  m.def("check_objective", &cqfm::check_objective, "Z"_a, "y"_a, "a"_a, "tau"_a);

  py::class_<cqfm::QppcaEstimate>(m, "QppcaEstimate")
      .def_readonly("R", &cqfm::QppcaEstimate::R)
      .def_readonly("tau", &cqfm::QppcaEstimate::tau)
      .def_readonly("F_hat", &cqfm::QppcaEstimate::F_hat)
      .def_readonly("G_hat", &cqfm::QppcaEstimate::G_hat)
      .def_readonly("B_hat", &cqfm::QppcaEstimate::B_hat)
      .def_readonly("Omega_hat", &cqfm::QppcaEstimate::Omega_hat)
      .def_readonly("F_tilde", &cqfm::QppcaEstimate::F_tilde)
      .def_readonly("spectrum", &cqfm::QppcaEstimate::spectrum)
      .def_readonly("Y_hat", &cqfm::QppcaEstimate::Y_hat)
      .def_readonly("basis", &cqfm::QppcaEstimate::basis)
      .def_readonly("rank_warning", &cqfm::QppcaEstimate::rank_warning)
      .def_readonly("gap_warning", &cqfm::QppcaEstimate::gap_warning)
      .def("loading", &cqfm::QppcaEstimate::loading, "x"_a)
      .def("loading_grid", &cqfm::QppcaEstimate::loading_grid, "X"_a);
  m.def(
      "qppca",
      [](const MatrixXd& Y, const MatrixXd& X, double tau, int R, int k_n, double tol, unsigned threads) {
        cqfm::PipelineOptions opts;
        opts.quantreg = qr_options(tol, 500, threads);
        return cqfm::qppca_pipeline(make_panel(Y, X), tau, k_n, R, opts);
      },
      "Y"_a, "X"_a, "tau"_a, "R"_a, "k_n"_a = 0, "tol"_a = 1e-8, "threads"_a = 0,
      py::call_guard<py::gil_scoped_release>());

  py::class_<cqfm::BaselineEstimate>(m, "BaselineEstimate")
      .def_property_readonly("method", [](const cqfm::BaselineEstimate& e) { return cqfm::to_string(e.method); })
      .def_readonly("F_hat", &cqfm::BaselineEstimate::F_hat)
      .def_readonly("G_hat", &cqfm::BaselineEstimate::G_or_Lambda_hat)
      .def_readonly("B_hat", &cqfm::BaselineEstimate::B_hat)
      .def_readonly("eigenvalues", &cqfm::BaselineEstimate::eigenvalues)
      .def_readonly("spectrum", &cqfm::BaselineEstimate::spectrum)
      .def_readonly("projected", &cqfm::BaselineEstimate::projected);
  m.def(
      "ppca", [](const MatrixXd& Y, const MatrixXd& X, int R, int k_n) {
        return cqfm::ppca_pipeline(make_panel(Y, X), k_n, R);
      },
      "Y"_a, "X"_a, "R"_a, "k_n"_a = 0);
  m.def(
      "pca", [](const MatrixXd& Y, int R, bool demean) { return cqfm::pca_pipeline(Y, R, demean); }, "Y"_a, "R"_a,
      "demean"_a = false);

  py::class_<cqfm::FactorCountResult>(m, "FactorCountResult")
      .def_readonly("spectrum", &cqfm::FactorCountResult::spectrum)
      .def_readonly("p_n", &cqfm::FactorCountResult::p_n)
      .def_readonly("R_rank_min", &cqfm::FactorCountResult::R_rank_min)
      .def_readonly("R_eigen_ratio", &cqfm::FactorCountResult::R_eigen_ratio)
      .def_readonly("R_bar", &cqfm::FactorCountResult::R_bar);
  m.def(
      "select_num_factors",
      [](const MatrixXd& Y, const MatrixXd& X, double tau, int k_n, int R_bar, double d, double exponent) {
        const auto panel = make_panel(Y, X);
        const auto design = cqfm::build_design(panel, k_n);
        const auto fit = cqfm::fit_quantile_panel(panel.Y, design.Z, tau);
        return cqfm::select_num_factors(fit, R_bar, d, exponent);
      },
      "Y"_a, "X"_a, "tau"_a = 0.5, "k_n"_a = 0, "R_bar"_a = 0, "d"_a = 0.25, "exponent"_a = -0.25,
      py::call_guard<py::gil_scoped_release>());
  m.def("select_from_spectrum", &cqfm::select_from_spectrum, "spectrum"_a, "n"_a, "T"_a, "R_bar"_a = 0,
        "d"_a = 0.25, "exponent"_a = -0.25);
  m.def("default_threshold", &cqfm::default_threshold, "rho_1"_a, "n"_a, "T"_a, "d"_a = 0.25,
        "exponent"_a = -0.25);
  m.def("rank_min_estimate", &cqfm::rank_min_estimate, "eigenvalues"_a, "p_n"_a);
  m.def("eigen_ratio_estimate", &cqfm::eigen_ratio_estimate, "eigenvalues"_a);

  py::class_<cqfm::SimulatedPanel>(m, "SimulatedPanel")
      .def_property_readonly("Y", [](const cqfm::SimulatedPanel& s) { return s.panel.Y; })
      .def_property_readonly("X", [](const cqfm::SimulatedPanel& s) { return s.panel.X; })
      .def_readonly("F_true", &cqfm::SimulatedPanel::F_true)
      .def_readonly("G_true", &cqfm::SimulatedPanel::G_true)
      .def("num_factors", &cqfm::SimulatedPanel::num_factors, "tau"_a)
      .def("theta_true", &cqfm::SimulatedPanel::theta_true, "tau"_a)
      .def("true_loading_grid", &cqfm::SimulatedPanel::true_loading_grid, "tau"_a, "grid"_a);
  m.def(
      "simulate_panel",
      [](long n, long T, long D, int R_loc, bool include_scale_factor, const std::string& error_dist,
         double noise_scale, std::uint64_t seed, std::vector<std::string> loading_functions) {
        cqfm::DgpSpec spec;
        spec.n = n;
        spec.T = T;
        spec.D = D;
        spec.R_loc = R_loc;
        spec.include_scale_factor = include_scale_factor;
        spec.error_dist = cqfm::parse_error_distribution(error_dist);
        spec.noise_scale = noise_scale;
        spec.seed = seed;
        spec.loading_functions = std::move(loading_functions);
        return cqfm::simulate_panel(spec);
      },
      "n"_a = 500, "T"_a = 10, "D"_a = 2, "R_loc"_a = 2, "include_scale_factor"_a = false,
      "error_dist"_a = "normal", "noise_scale"_a = 1.0, "seed"_a = 1,
      "loading_functions"_a = std::vector<std::string>{});
  m.def("trace_r2", &cqfm::trace_r2, "F_true"_a, "F_hat"_a);
}
