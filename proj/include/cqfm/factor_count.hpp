#ifndef CQFM_FACTOR_COUNT_HPP
#define CQFM_FACTOR_COUNT_HPP

#include <Eigen/Dense>

#include "cqfm/quantreg.hpp"

namespace cqfm {

struct FactorCountResult {
  /// Every eigenvalue of Y_hat'Y_hat/(nT), descending. The first R_bar are
  /// the ones the rank-minimization rule inspects; the ratio rule also uses
  /// entry R_bar.
  Eigen::VectorXd spectrum;
  double p_n = 0.0;
  int R_rank_min = 0;
  int R_eigen_ratio = 1;
  double d = 0.25;
  double exponent = -0.25;
  int R_bar = 1;

  Eigen::VectorXd eigenvalues() const { return spectrum.head(R_bar); }
};

/// Number of eigenvalues strictly above p_n.
int rank_min_estimate(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues, double p_n);

/// d * sqrt(rho_1) * n^exponent * ln T; the recommended exponent is -1/4.
/// Throws InvalidArgument for T < 2, n < 2, d <= 0 or rho_1 <= 0.
double default_threshold(double rho_1, long n, long T, double d = 0.25, double exponent = -0.25);

/// argmax_{j=1..R_bar} rho_j / rho_{j+1} with R_bar = eigenvalues.size() - 1.
/// Eigenvalues below 1e-12 rho_1 are floored there; ties go to the smaller j.
int eigen_ratio_estimate(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues);

/// min(8, T - 1).
int default_max_factors(Eigen::Index T);

/// Applies both selection rules to a descending spectrum of an n x T panel.
/// R_bar <= 0 selects default_max_factors(T).
FactorCountResult select_from_spectrum(const Eigen::Ref<const Eigen::VectorXd>& spectrum, Eigen::Index n,
                                       Eigen::Index T, int R_bar = 0, double d = 0.25,
                                       double exponent = -0.25);

FactorCountResult select_num_factors(const SieveFit& fit, int R_bar = 0, double d = 0.25,
                                     double exponent = -0.25);

}  // namespace cqfm

#endif  // CQFM_FACTOR_COUNT_HPP
