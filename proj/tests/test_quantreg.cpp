#include <doctest.h>

#include <algorithm>
#include <random>

#include "cqfm/error.hpp"
#include "cqfm/quantreg.hpp"
#include "oracles.hpp"

using namespace cqfm;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_SUITE("quantreg") {
  TEST_CASE("intercept-only fit returns a sample quantile") {
    VectorXd y(5);
    y << 3, 1, 4, 1, 5;
    const MatrixXd Z = MatrixXd::Ones(5, 1);
    CHECK(fit_quantile(Z, y, 0.5).a_hat(0) == doctest::Approx(3.0));
    CHECK(fit_quantile(Z, y, 0.1).a_hat(0) == doctest::Approx(1.0));
    CHECK(fit_quantile(Z, y, 0.9).a_hat(0) == doctest::Approx(5.0));
  }

  TEST_CASE("exact linear data is interpolated") {
    MatrixXd Z(6, 2);
    VectorXd y(6);
    for (int i = 0; i < 6; ++i) {
      Z(i, 0) = 1;
      Z(i, 1) = i;
      y(i) = 2 - 0.5 * i;
    }
    const auto fit = fit_quantile(Z, y, 0.3);
    CHECK(fit.a_hat(0) == doctest::Approx(2.0));
    CHECK(fit.a_hat(1) == doctest::Approx(-0.5));
    CHECK(fit.objective == doctest::Approx(0.0));
  }

  TEST_CASE("objective matches brute force over basic solutions") {
    std::mt19937_64 rng(101);
    for (int k = 0; k < 60; ++k) {
      const Index n = 8 + static_cast<Index>(rng() % 20);
      const Index p = 1 + static_cast<Index>(rng() % 3);
      const double tau = 0.05 + 0.9 * (k % 7) / 6.0;
      const auto inst = oracle::random_instance(rng, n, p, tau);
      const auto fit = fit_quantile(inst.Z, inst.y, tau);
      const double best = oracle::brute_force_quantile(inst.Z, inst.y, tau);
      CHECK(fit.objective == doctest::Approx(best).epsilon(1e-9));
      CHECK(fit.objective == doctest::Approx(oracle::check_sum(inst.Z, inst.y, fit.a_hat, tau)).epsilon(1e-12));
      CHECK(static_cast<Index>(fit.basis.size()) == p);
      CHECK(fit.kkt_residual <= 1e-8);
    }
  }

  TEST_CASE("ties in the response are handled") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
      auto inst = oracle::random_instance(rng, 20, 2, 0.5);
      for (Index i = 0; i < 20; ++i) inst.y(i) = std::round(inst.y(i));
      for (Index i = 0; i < 20; ++i) inst.Z(i, 1) = std::round(inst.Z(i, 1));
      if (Eigen::FullPivLU<MatrixXd>(inst.Z).rank() < 2) continue;
      const auto fit = fit_quantile(inst.Z, inst.y, inst.tau);
      CHECK(fit.objective == doctest::Approx(oracle::brute_force_quantile(inst.Z, inst.y, inst.tau)).epsilon(1e-9));
    }
  }

  TEST_CASE("equivariance in y") {
    std::mt19937_64 rng(7);
    const auto inst = oracle::random_instance(rng, 80, 3, 0.7);
    const auto base = fit_quantile(inst.Z, inst.y, 0.7);
    VectorXd c(3);
    c << 1.5, -2, 0.25;
    const auto shifted = fit_quantile(inst.Z, inst.y + inst.Z * c, 0.7);
    CHECK((shifted.a_hat - base.a_hat - c).cwiseAbs().maxCoeff() < 1e-8);
    const auto scaled = fit_quantile(inst.Z, 3.0 * inst.y, 0.7);
    CHECK((scaled.a_hat - 3.0 * base.a_hat).cwiseAbs().maxCoeff() < 1e-8);
    // reflection: y -> -y at 1 - tau negates the coefficients
    const auto reflected = fit_quantile(inst.Z, -inst.y, 0.3);
    CHECK(reflected.objective == doctest::Approx(base.objective).epsilon(1e-10));
  }

  TEST_CASE("residual sign counts bracket tau") {
    std::mt19937_64 rng(8);
    for (double tau : {0.1, 0.25, 0.5, 0.9}) {
      const auto inst = oracle::random_instance(rng, 200, 3, tau);
      const auto fit = fit_quantile(inst.Z, inst.y, tau);
      const VectorXd r = inst.y - inst.Z * fit.a_hat;
      const double tol = 1e-9 * (1 + inst.y.cwiseAbs().maxCoeff());
      const double below = (r.array() < -tol).count();
      const double zero = (r.array().abs() <= tol).count();
      CHECK(below <= tau * 200 + 1e-9);
      CHECK(below + zero >= tau * 200 - 1e-9);
      CHECK(zero >= 3);
    }
  }

  TEST_CASE("intercept fits are monotone in tau") {
    std::mt19937_64 rng(9);
    const auto inst = oracle::random_instance(rng, 150, 1, 0.5);
    double prev = -1e300;
    for (double tau = 0.05; tau < 0.96; tau += 0.05) {
      const double a = fit_quantile(inst.Z, inst.y, tau).a_hat(0);
      CHECK(a >= prev);
      prev = a;
    }
  }

  TEST_CASE("objective trace is nonincreasing") {
    std::mt19937_64 rng(10);
    const auto inst = oracle::random_instance(rng, 300, 3, 0.25);
    const auto fit = fit_quantile(inst.Z, inst.y, 0.25);
    REQUIRE(!fit.objective_trace.empty());
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
      CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1] * (1 + 1e-14) + 1e-14);
    CHECK(fit.objective_trace.back() == doctest::Approx(fit.objective));
  }

  TEST_CASE("kkt violation is positive away from the optimum") {
    std::mt19937_64 rng(11);
    const auto inst = oracle::random_instance(rng, 50, 2, 0.5);
    const auto fit = fit_quantile(inst.Z, inst.y, 0.5);
    CHECK(kkt_violation(inst.Z, inst.y, fit.a_hat, 0.5) <= 1e-8);
    VectorXd off = fit.a_hat;
    off(0) += 1.0;
    CHECK(kkt_violation(inst.Z, inst.y, off, 0.5) > 1e-2);
  }

  TEST_CASE("argument and rank errors") {
    MatrixXd Z(4, 2);
    Z << 1, 2, 1, 2, 1, 2, 1, 2;
    VectorXd y = VectorXd::Ones(4);
    CHECK_THROWS_AS(fit_quantile(Z, y, 0.5), RankDeficient);
    CHECK_THROWS_AS(fit_quantile(MatrixXd::Ones(4, 1), y, 0.0), InvalidArgument);
    CHECK_THROWS_AS(fit_quantile(MatrixXd::Ones(4, 1), y, 1.0), InvalidArgument);
    CHECK_THROWS_AS(fit_quantile(MatrixXd::Ones(3, 1), y, 0.5), InvalidArgument);
  }

  TEST_CASE("iteration cap raises NotConverged") {
    std::mt19937_64 rng(12);
    const auto inst = oracle::random_instance(rng, 400, 3, 0.5);
    QuantRegOptions opts;
    opts.max_iterations = 0;
    bool raised = false;
    try {
      const auto fit = fit_quantile(inst.Z, inst.y, 0.5, opts);
      raised = fit.kkt_residual > 1e-8;  // warm start alone may already be optimal
    } catch (const NotConverged& e) {
      raised = true;
      CHECK(e.kkt_residual() > 0);
    }
    CHECK(raised);
  }

  TEST_CASE("panel fit matches column-wise fits and is thread independent") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> N;
    const auto inst = oracle::random_instance(rng, 60, 3, 0.5);
    MatrixXd Y = MatrixXd::NullaryExpr(60, 5, [&] { return N(rng); });
    QuantRegOptions one;
    one.threads = 1;
    QuantRegOptions many;
    many.threads = 4;
    const auto a = fit_quantile_panel(Y, inst.Z, 0.75, one);
    const auto b = fit_quantile_panel(Y, inst.Z, 0.75, many);
    CHECK(a.A_hat == b.A_hat);
    for (Index t = 0; t < 5; ++t) CHECK(a.A_hat.col(t) == fit_quantile(inst.Z, Y.col(t), 0.75).a_hat);
    CHECK(a.Y_hat.isApprox(inst.Z * a.A_hat));
    CHECK(a.tau == 0.75);
  }

  TEST_CASE("failing period is named") {
    std::mt19937_64 rng(14);
    const auto inst = oracle::random_instance(rng, 30, 2, 0.5);
    MatrixXd Y = MatrixXd::Ones(30, 3);
    Y(4, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
      fit_quantile_panel(Y, inst.Z, 0.5);
      FAIL("expected an exception");
    } catch (const StageError& e) {
      CHECK(e.stage() == "period 2");
    }
  }

  TEST_CASE("least squares agrees with the normal equations") {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> N;
    const auto inst = oracle::random_instance(rng, 90, 4, 0.5);
    MatrixXd Y = MatrixXd::NullaryExpr(90, 6, [&] { return N(rng); });
    const auto fit = fit_least_squares_panel(Y, inst.Z);
    const MatrixXd ZtZ = inst.Z.transpose() * inst.Z;
    const MatrixXd ref = ZtZ.ldlt().solve(inst.Z.transpose() * Y);
    CHECK((fit.A_hat - ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::isnan(fit.tau));
  }
}
