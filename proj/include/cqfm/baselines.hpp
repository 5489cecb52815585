#ifndef CQFM_BASELINES_HPP
#define CQFM_BASELINES_HPP

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cqfm/qppca.hpp"

namespace cqfm {

enum class Method { QPPCA, PPCA, PCA };

std::string to_string(Method m);
/// Accepts "qppca", "ppca", "pca" (case-insensitive).
Method parse_method(const std::string& name);

struct BaselineEstimate {
  Method method = Method::PCA;
  Eigen::MatrixXd F_hat;
  Eigen::MatrixXd G_or_Lambda_hat;
  Eigen::MatrixXd B_hat;  ///< empty for PCA
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd spectrum;
  /// Full projected estimate for PPCA, including the basis needed to
  /// evaluate loading functions.
  std::optional<QppcaEstimate> projected;
  bool rank_warning = false;
  bool gap_warning = false;
};

/// Projected PCA: least-squares sieve projection, then the same steps two
/// and three as the quantile estimator.
BaselineEstimate ppca_pipeline(const PanelData& panel, int k_n, int R);

/// PCA on the raw panel. With `demean`, each period's cross-sectional mean
/// is removed first.
BaselineEstimate pca_pipeline(const PanelData& panel, int R, bool demean = false);
BaselineEstimate pca_pipeline(const Eigen::Ref<const Eigen::MatrixXd>& Y, int R, bool demean = false);

}  // namespace cqfm

#endif  // CQFM_BASELINES_HPP
