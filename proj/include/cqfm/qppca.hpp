#ifndef CQFM_QPPCA_HPP
#define CQFM_QPPCA_HPP

#include <Eigen/Dense>

#include "cqfm/basis.hpp"
#include "cqfm/panel.hpp"
#include "cqfm/quantreg.hpp"

namespace cqfm {

/// Principal components of a fitted panel.
struct FactorExtraction {
  Eigen::MatrixXd F_hat;      ///< T x R, F'F/T = I
  Eigen::MatrixXd G_hat;      ///< n x R, Y_hat F_hat / T
  Eigen::VectorXd Omega_hat;  ///< top R eigenvalues of Y_hat'Y_hat/(nT)
  Eigen::VectorXd spectrum;   ///< all T eigenvalues, descending
  Eigen::Index numerical_rank = 0;
  bool rank_warning = false;  ///< R exceeds the numerical rank
  bool gap_warning = false;   ///< Omega[R-1] and the next eigenvalue nearly tie
};

/// Eigen-decomposes the T x T matrix Y_hat'Y_hat. Columns of F_hat are
/// ordered by descending eigenvalue, scaled by sqrt(T), and signed so that
/// their largest-magnitude entry is positive.
///
/// Throws InvalidArgument when R is outside [1, T] or Y_hat is identically zero.
FactorExtraction extract_factors(const Eigen::Ref<const Eigen::MatrixXd>& Y_hat, int R);
inline FactorExtraction extract_factors(const SieveFit& fit, int R) { return extract_factors(fit.Y_hat, R); }

/// Descending eigenvalues of Y'Y/(nT).
Eigen::VectorXd panel_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& Y);

/// B_hat = A_hat F_hat / T.
Eigen::MatrixXd recover_loading_coefficients(const Eigen::Ref<const Eigen::MatrixXd>& A_hat,
                                             const Eigen::Ref<const Eigen::MatrixXd>& F_hat);
inline Eigen::MatrixXd recover_loading_coefficients(const SieveFit& fit,
                                                    const Eigen::Ref<const Eigen::MatrixXd>& F_hat) {
  return recover_loading_coefficients(fit.A_hat, F_hat);
}

/// g_hat(x)' = phi(x)' B_hat for a standardized characteristic vector x.
Eigen::VectorXd evaluate_loading_function(const SieveBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& B_hat,
                                          const Eigen::Ref<const Eigen::VectorXd>& x);

/// Row-wise version over a grid of standardized characteristics (m x D);
/// returns m x R.
Eigen::MatrixXd evaluate_loading_grid(const SieveBasis& basis, const Eigen::Ref<const Eigen::MatrixXd>& B_hat,
                                      const Eigen::Ref<const Eigen::MatrixXd>& grid);

/// F_tilde = Y_hat' G_hat (G_hat'G_hat)^{-1}. Throws RankDeficient when
/// G_hat'G_hat is numerically singular.
Eigen::MatrixXd update_factors(const Eigen::Ref<const Eigen::MatrixXd>& Y_hat,
                               const Eigen::Ref<const Eigen::MatrixXd>& G_hat);
inline Eigen::MatrixXd update_factors(const SieveFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& G_hat) {
  return update_factors(fit.Y_hat, G_hat);
}

/// Output of the projected estimators (quantile or least-squares first stage).
struct QppcaEstimate {
  int R = 0;
  double tau = 0.5;  ///< NaN for the least-squares first stage
  Eigen::MatrixXd F_hat;
  Eigen::MatrixXd G_hat;
  Eigen::MatrixXd B_hat;
  Eigen::VectorXd Omega_hat;
  Eigen::MatrixXd F_tilde;
  Eigen::VectorXd spectrum;
  Eigen::MatrixXd A_hat;
  /// Fitted panel; for the quantile first stage these are the quantile returns.
  Eigen::MatrixXd Y_hat;
  SieveBasis basis;
  Standardizer standardizer;
  bool rank_warning = false;
  bool gap_warning = false;

  /// Loading functions at a raw (unstandardized) characteristic vector.
  Eigen::VectorXd loading(const Eigen::Ref<const Eigen::VectorXd>& x_raw) const;
  /// Row-wise over raw characteristics; returns m x R.
  Eigen::MatrixXd loading_grid(const Eigen::Ref<const Eigen::MatrixXd>& X_raw) const;
};

struct PipelineOptions {
  QuantRegOptions quantreg;
};

/// Sieve basis and design matrix for a panel's characteristics.
struct SieveDesign {
  Standardizer standardizer;
  SieveBasis basis;
  Eigen::MatrixXd Z;
};

/// Standardizes the characteristics and evaluates the basis. k_n <= 0 uses
/// default_basis_size(n).
SieveDesign build_design(const PanelData& panel, int k_n);

/// Steps two and three applied to an existing first-stage fit.
QppcaEstimate estimate_from_fit(const SieveFit& fit, const SieveDesign& design, int R);

/// Full three-stage estimator at quantile tau. Failures are rethrown as
/// StageError naming the stage.
QppcaEstimate qppca_pipeline(const PanelData& panel, double tau, int k_n, int R,
                             const PipelineOptions& options = {});

}  // namespace cqfm

#endif  // CQFM_QPPCA_HPP
