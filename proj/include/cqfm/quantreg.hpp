#ifndef CQFM_QUANTREG_HPP
#define CQFM_QUANTREG_HPP

#include <vector>

#include <Eigen/Dense>

namespace cqfm {

/// Check (pinball) loss (tau - 1{u <= 0}) * u.
inline double check_loss(double u, double tau) { return (tau - (u <= 0.0 ? 1.0 : 0.0)) * u; }

/// Sum of check losses of y - Z a.
double check_objective(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const Eigen::Ref<const Eigen::VectorXd>& a, double tau);

/// One cross-sectional quantile regression: minimize sum_i rho_tau(y_i - z_i' a).
struct CheckLossProblem {
  Eigen::MatrixXd Z;
  Eigen::VectorXd y;
  double tau = 0.5;
};

struct QuantRegOptions {
  double tol = 1e-8;
  int max_iterations = 500;
  /// Worker threads for panel fits; 0 picks hardware concurrency.
  unsigned threads = 0;
};

struct QuantileFitResult {
  Eigen::VectorXd a_hat;
  double objective = 0.0;
  /// Vertex (simplex) iterations after the interior-point warm start.
  int iterations = 0;
  int interior_point_iterations = 0;
  /// Largest relative violation of the subgradient optimality condition.
  double kkt_residual = 0.0;
  /// Objective at every vertex visited; nonincreasing.
  std::vector<double> objective_trace;
  /// Indices of the p observations interpolated by the solution.
  std::vector<Eigen::Index> basis;
};

/// Exact minimizer of the check-loss objective. The returned coefficients
/// interpolate p observations (a basic solution of the LP) and satisfy the
/// subgradient optimality condition up to `tol`.
///
/// Throws InvalidArgument for tau outside (0,1) or shape errors,
/// RankDeficient when Z is numerically rank deficient, and NotConverged when
/// the iteration cap is hit.
QuantileFitResult fit_quantile(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                               const Eigen::Ref<const Eigen::VectorXd>& y, double tau,
                               const QuantRegOptions& options = {});

inline QuantileFitResult fit_quantile(const CheckLossProblem& problem,
                                      const QuantRegOptions& options = {}) {
  return fit_quantile(problem.Z, problem.y, problem.tau, options);
}

/// Relative subgradient-optimality violation at coefficients a.
double kkt_violation(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                     const Eigen::Ref<const Eigen::VectorXd>& y,
                     const Eigen::Ref<const Eigen::VectorXd>& a, double tau);

/// Period-by-period first-stage fit of a panel.
struct SieveFit {
  Eigen::MatrixXd A_hat;  ///< p x T coefficients
  Eigen::MatrixXd Y_hat;  ///< n x T fitted values Z * A_hat
  /// Quantile level; NaN for least squares fits.
  double tau;
  std::vector<int> iterations;
  std::vector<double> kkt_residuals;
};

/// Throws RankDeficient when the smallest singular value of Z is below
/// 1e-10 times the largest.
void require_full_column_rank(const Eigen::Ref<const Eigen::MatrixXd>& Z);

/// Fits every column of Y independently. Columns may be solved concurrently;
/// the result does not depend on scheduling. A failing period is reported as
/// a StageError naming the period (1-based).
SieveFit fit_quantile_panel(const Eigen::Ref<const Eigen::MatrixXd>& Y,
                            const Eigen::Ref<const Eigen::MatrixXd>& Z, double tau,
                            const QuantRegOptions& options = {});

/// Least-squares counterpart, A_hat = (Z'Z)^{-1} Z'Y via column-pivoted QR.
SieveFit fit_least_squares_panel(const Eigen::Ref<const Eigen::MatrixXd>& Y,
                                 const Eigen::Ref<const Eigen::MatrixXd>& Z);

}  // namespace cqfm

#endif  // CQFM_QUANTREG_HPP
