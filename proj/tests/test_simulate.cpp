#include <doctest.h>

#include "cqfm/error.hpp"
#include "cqfm/factor_count.hpp"
#include "cqfm/simulate.hpp"
#include "oracles.hpp"

using namespace cqfm;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_SUITE("simulate") {
  TEST_CASE("error quantiles") {
    CHECK(error_quantile(ErrorDistribution::Normal, 0.5) == 0.0);
    CHECK(error_quantile(ErrorDistribution::Normal, 0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(error_quantile(ErrorDistribution::Cauchy, 0.75) == doctest::Approx(1.0));
    CHECK(error_quantile(ErrorDistribution::StudentT3, 0.95) == doctest::Approx(2.353363).epsilon(1e-6));
    CHECK(error_quantile(ErrorDistribution::StudentT3, 0.05) == doctest::Approx(-2.353363).epsilon(1e-6));
    CHECK_THROWS_AS(error_quantile(ErrorDistribution::Normal, 1.0), InvalidArgument);
  }

  TEST_CASE("loading function ids") {
    const auto f = LoadingFunction::parse("2.5*sin:2");
    CHECK(f.name == "sin");
    CHECK(f.characteristic == 1);
    CHECK(f.coefficient == 2.5);
    CHECK(LoadingFunction::parse(f.id()).coefficient == 2.5);
    VectorXd x(2);
    x << 0.3, 0.5;
    CHECK(f(x) == doctest::Approx(2.5));
    CHECK(LoadingFunction::parse("centered_square:1")(x) == doctest::Approx(0.09 - 1.0 / 3.0));
    CHECK_THROWS_AS(LoadingFunction::parse("square:1"), InvalidArgument);
    CHECK_THROWS_AS(LoadingFunction::parse("linear:0"), InvalidArgument);
  }

  TEST_CASE("noiseless panel is exactly the location structure") {
    DgpSpec spec;
    spec.n = 50;
    spec.T = 6;
    spec.noise_scale = 0.0;
    const auto sim = simulate_panel(spec);
    for (Index i = 0; i < 50; ++i) {
      const double x1 = sim.panel.X(i, 0), x2 = sim.panel.X(i, 1);
      for (Index t = 0; t < 6; ++t)
        CHECK(sim.panel.Y(i, t) ==
              doctest::Approx(x1 * sim.F_true(t, 0) + (x2 * x2 - 1.0 / 3.0) * sim.F_true(t, 1)).epsilon(1e-12));
    }
    CHECK(sim.panel.X.minCoeff() >= -1.0);
    CHECK(sim.panel.X.maxCoeff() <= 1.0);
  }

  TEST_CASE("quantile structure and its rank") {
    DgpSpec spec;
    spec.n = 80;
    spec.T = 7;
    spec.include_scale_factor = true;
    spec.error_dist = ErrorDistribution::StudentT3;
    const auto sim = simulate_panel(spec);
    CHECK(sim.num_factors(0.5) == 2);
    CHECK(sim.num_factors(0.9) == 3);
    CHECK(sim.F_true.col(2).minCoeff() > 0);
    for (double tau : {0.5, 0.9}) {
      const MatrixXd theta = sim.theta_true(tau);
      // analytic quantile: location part + s(x) h_t Q_tau(u)
      const double q = error_quantile(spec.error_dist, tau);
      const MatrixXd ref = sim.G_true.leftCols(2) * sim.F_true.leftCols(2).transpose() +
                           q * sim.G_true.col(2) * sim.F_true.col(2).transpose();
      CHECK((theta - ref).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::JacobiSVD<MatrixXd> svd(theta);
      const auto sv = svd.singularValues();
      CHECK((sv.array() > 1e-9 * sv(0)).count() == sim.num_factors(tau));
    }
    const VectorXd x = sim.panel.X.row(0).transpose();
    CHECK(sim.true_loading(0.9, x)(2) == doctest::Approx(error_quantile(spec.error_dist, 0.9) * scale_loading(x)));
  }

  TEST_CASE("same seed, same panel; replication seeds differ") {
    DgpSpec spec;
    spec.seed = 77;
    spec.include_scale_factor = true;
    const auto a = simulate_panel(spec);
    const auto b = simulate_panel(spec);
    CHECK(a.panel.Y == b.panel.Y);
    CHECK(a.panel.X == b.panel.X);
    CHECK(replication_seed(77, 0) != replication_seed(77, 1));
    CHECK(replication_seed(77, 0) == replication_seed(77, 0));
    spec.seed = 78;
    CHECK(simulate_panel(spec).panel.Y != a.panel.Y);
  }

  TEST_CASE("trace-R2 and alignment") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    const MatrixXd F = MatrixXd::NullaryExpr(30, 2, [&] { return N(rng); });
    MatrixXd Q(2, 2);
    Q << 2, 1, -1, 3;
    CHECK(trace_r2(F, F * Q) == doctest::Approx(1.0));
    const MatrixXd Fh = F + 0.5 * MatrixXd::NullaryExpr(30, 2, [&] { return N(rng); });
    CHECK(trace_r2(F, Fh) == doctest::Approx(oracle::trace_r2(F, Fh)).epsilon(1e-12));
    CHECK(trace_r2(F, Fh) < 1.0);
    // exact rotation is undone by H
    const MatrixXd G = MatrixXd::NullaryExpr(100, 2, [&] { return N(rng); });
    const auto fx = extract_factors(G * F.transpose(), 2);
    const MatrixXd H = rotation_align(G, F, fx.F_hat, fx.Omega_hat);
    CHECK(alignment_error(F, fx.F_hat, H) < 1e-10);
    const MatrixXd P = procrustes_align(F, F * Eigen::Rotation2Dd(0.7).toRotationMatrix());
    CHECK((P.transpose() * P - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("evaluation grids") {
    MatrixXd X(3, 2);
    X << 0, 0, 1, 2, 0.5, 1;
    const MatrixXd g = characteristic_grid(X, 5);
    CHECK(g.rows() == 25);
    CHECK(g.col(0).minCoeff() == 0.0);
    CHECK(g.col(1).maxCoeff() == 2.0);
    MatrixXd Xw(4, 4);
    Xw.setRandom();
    CHECK(characteristic_grid(Xw, 20).rows() == 80);  // 20^4 > 10000: slices
  }

  TEST_CASE("monte carlo is deterministic and thread independent") {
    MonteCarloConfig mc;
    mc.spec.n = 120;
    mc.spec.T = 6;
    mc.spec.include_scale_factor = true;
    mc.taus = {0.5, 0.9};
    mc.n_reps = 4;
    mc.threads = 1;
    const auto a = run_monte_carlo(mc);
    mc.parallel = true;
    mc.threads = 3;
    const auto b = run_monte_carlo(mc);
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.records.size() == 4u * (2 + 2));  // QPPCA at two taus, PPCA and PCA once
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].trace_r2 == b.records[i].trace_r2);
      CHECK(a.records[i].alignment_error == b.records[i].alignment_error);
      CHECK(a.records[i].R_rank_min == b.records[i].R_rank_min);
    }
    CHECK(a.summary(Method::QPPCA, 0.9).n_ok == 4);
    CHECK(a.summary(Method::QPPCA, 0.9).trace_r2_mean > 0.5);
    CHECK(std::isnan(a.summary(Method::PCA, 0.5).loading_rmse_mean));
  }

  TEST_CASE("invalid specifications") {
    DgpSpec spec;
    spec.R_loc = 0;
    CHECK_THROWS_AS(simulate_panel(spec), InvalidArgument);
    spec = DgpSpec{};
    spec.loading_functions = {"linear:3"};
    spec.R_loc = 1;
    CHECK_THROWS_AS(simulate_panel(spec), InvalidArgument);
    CHECK_THROWS_AS(parse_error_distribution("laplace"), InvalidArgument);
    CHECK(parse_error_distribution("T3") == ErrorDistribution::StudentT3);
    CHECK(median({3, 1, 2, 10}) == 2.5);
  }
}
