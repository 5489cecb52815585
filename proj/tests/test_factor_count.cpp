#include <doctest.h>

#include "cqfm/error.hpp"
#include "cqfm/factor_count.hpp"

using namespace cqfm;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("factor_count") {
  TEST_CASE("empirical table: thresholds and selected ranks") {
    struct Row {
      VectorXd eig;
      double p_n;
    };
    const Row rows[] = {
        {vec({0.887, 0.094, 0.084, 0.053, 0.043}), 0.224}, {vec({1.713, 0.110, 0.098, 0.059, 0.047}), 0.311},
        {vec({2.706, 0.115, 0.087, 0.074, 0.067}), 0.391}, {vec({8.415, 0.311, 0.173, 0.161, 0.138}), 0.690},
        {vec({13.715, 0.567, 0.428, 0.291, 0.246}), 0.880},
    };
    for (const auto& r : rows) {
      CHECK(std::abs(default_threshold(r.eig(0), 355, 62) - r.p_n) <= 0.005);
      CHECK(rank_min_estimate(r.eig, r.p_n) == 1);
      CHECK(rank_min_estimate(r.eig, default_threshold(r.eig(0), 355, 62)) == 1);
    }
    CHECK(eigen_ratio_estimate(vec({0.929, 0.090, 0.081, 0.066, 0.043})) == 1);
  }

  TEST_CASE("rank-min counts strictly larger eigenvalues") {
    CHECK(rank_min_estimate(vec({3, 2, 1}), 1.0) == 2);
    CHECK(rank_min_estimate(vec({3, 2, 1}), 5.0) == 0);
    CHECK(rank_min_estimate(vec({3, 2, 1}), 0.5) == 3);
  }

  TEST_CASE("eigen-ratio ties and floors") {
    CHECK(eigen_ratio_estimate(vec({8, 4, 2, 1})) == 1);    // all ratios 2: smallest j
    CHECK(eigen_ratio_estimate(vec({10, 9, 1, 0.9})) == 2);
    CHECK(eigen_ratio_estimate(vec({5, 3, 0, 0})) == 2);  // zero floored, no division by zero
    CHECK_THROWS_AS(eigen_ratio_estimate(vec({1})), InvalidArgument);
  }

  TEST_CASE("scaling: ratio invariant, rank-min equivariant") {
    const VectorXd eig = vec({2.0, 0.3, 0.05, 0.02, 0.01});
    const long n = 400, T = 20;
    const auto base = select_from_spectrum(eig, n, T, 4);
    for (double lambda : {0.1, 0.5, 3.0, 10.0}) {
      const auto s = select_from_spectrum(lambda * lambda * eig, n, T, 4);
      CHECK(s.R_eigen_ratio == base.R_eigen_ratio);
      CHECK(s.p_n == doctest::Approx(lambda * base.p_n));
      CHECK(s.R_rank_min == rank_min_estimate(eig.head(4), base.p_n / lambda));
    }
  }

  TEST_CASE("threshold is increasing in d and decreasing in n") {
    double prev = 0;
    for (double d : {0.1, 0.25, 0.5, 1.0}) {
      const double p = default_threshold(1.0, 500, 20, d);
      CHECK(p > prev);
      prev = p;
    }
    CHECK(default_threshold(1.0, 5000, 20) < default_threshold(1.0, 500, 20));
    CHECK(default_threshold(1.0, 500, 20, 0.25, -0.5) < default_threshold(1.0, 500, 20, 0.25, -0.25));
  }

  TEST_CASE("defaults and argument checks") {
    CHECK(default_max_factors(10) == 8);
    CHECK(default_max_factors(5) == 4);
    CHECK_THROWS_AS(default_threshold(1.0, 100, 1), InvalidArgument);
    CHECK_THROWS_AS(default_threshold(0.0, 100, 10), InvalidArgument);
    CHECK_THROWS_AS(default_threshold(1.0, 100, 10, -1.0), InvalidArgument);
    CHECK_THROWS_AS(select_from_spectrum(vec({1.0}), 10, 1), InvalidArgument);
    CHECK_THROWS_AS(select_from_spectrum(vec({3, 2, 1}), 10, 3, 3), InvalidArgument);
    const auto r = select_from_spectrum(vec({3, 2, 1, 0.5}), 50, 4);
    CHECK(r.R_bar == 3);
    CHECK(r.eigenvalues().size() == 3);
    CHECK(r.spectrum.size() == 4);
  }

  TEST_CASE("noiseless rank two spectrum") {
    const auto r = select_from_spectrum(vec({0.4, 0.1, 1e-17, 1e-18, 0, 0}), 1000, 6);
    CHECK(r.R_rank_min == 2);
    CHECK(r.R_eigen_ratio == 2);
  }
}
