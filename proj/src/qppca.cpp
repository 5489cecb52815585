#include "cqfm/qppca.hpp"

#include <cmath>
#include <string>

#include "cqfm/error.hpp"

namespace cqfm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kGapTolerance = 1e-10;

void apply_sign_convention(MatrixXd& F) {
  for (Index r = 0; r < F.cols(); ++r) {
    Index arg = 0;
    for (Index t = 1; t < F.rows(); ++t)
      if (std::abs(F(t, r)) > std::abs(F(arg, r))) arg = t;
    if (F(arg, r) < 0.0) F.col(r) *= -1.0;
  }
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

VectorXd panel_spectrum(const Eigen::Ref<const MatrixXd>& Y) {
  const double nT = static_cast<double>(Y.rows()) * static_cast<double>(Y.cols());
  const MatrixXd gram = Y.transpose() * Y / nT;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().reverse().cwiseMax(0.0);
}

FactorExtraction extract_factors(const Eigen::Ref<const MatrixXd>& Y_hat, int R) {
  const Index n = Y_hat.rows();
  const Index T = Y_hat.cols();
  if (R < 1) throw InvalidArgument("extract_factors: R must be >= 1");
  if (R > T)
    throw InvalidArgument("extract_factors: R = " + std::to_string(R) + " exceeds T = " + std::to_string(T));
  if (n < 1) throw InvalidArgument("extract_factors: empty panel");

  const double nT = static_cast<double>(n) * static_cast<double>(T);
  const MatrixXd gram = Y_hat.transpose() * Y_hat;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error("extract_factors: eigen-decomposition failed");

  FactorExtraction out;
  out.spectrum = (eig.eigenvalues().reverse() / nT).cwiseMax(0.0);
  const double top = out.spectrum(0);
  if (!(top > 0.0)) throw InvalidArgument("extract_factors: fitted panel is identically zero");

  out.numerical_rank = (out.spectrum.array() > kRankTolerance * top).count();
  out.rank_warning = R > out.numerical_rank;
  if (R < T) {
    const double last = out.spectrum(R - 1);
    out.gap_warning = last <= 0.0 || (last - out.spectrum(R)) < kGapTolerance * last;
  }

  out.F_hat = eig.eigenvectors().rowwise().reverse().leftCols(R) * std::sqrt(static_cast<double>(T));
  apply_sign_convention(out.F_hat);
  out.G_hat = Y_hat * out.F_hat / static_cast<double>(T);
  out.Omega_hat = out.spectrum.head(R);
  return out;
}

MatrixXd recover_loading_coefficients(const Eigen::Ref<const MatrixXd>& A_hat,
                                      const Eigen::Ref<const MatrixXd>& F_hat) {
  if (A_hat.cols() != F_hat.rows())
    throw InvalidArgument("recover_loading_coefficients: A_hat has " + std::to_string(A_hat.cols()) +
                          " periods but F_hat has " + std::to_string(F_hat.rows()));
  return A_hat * F_hat / static_cast<double>(F_hat.rows());
}

VectorXd evaluate_loading_function(const SieveBasis& basis, const Eigen::Ref<const MatrixXd>& B_hat,
                                   const Eigen::Ref<const VectorXd>& x) {
  if (B_hat.rows() != basis.dimension())
    throw InvalidArgument("evaluate_loading_function: B_hat rows do not match basis dimension");
  return B_hat.transpose() * basis.evaluate(x);
}

MatrixXd evaluate_loading_grid(const SieveBasis& basis, const Eigen::Ref<const MatrixXd>& B_hat,
                               const Eigen::Ref<const MatrixXd>& grid) {
  if (B_hat.rows() != basis.dimension())
    throw InvalidArgument("evaluate_loading_grid: B_hat rows do not match basis dimension");
  return basis.design_matrix(grid) * B_hat;
}

MatrixXd update_factors(const Eigen::Ref<const MatrixXd>& Y_hat, const Eigen::Ref<const MatrixXd>& G_hat) {
  if (Y_hat.rows() != G_hat.rows()) throw InvalidArgument("update_factors: row counts differ");
  const MatrixXd gram = G_hat.transpose() * G_hat;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) throw RankDeficient("update_factors: G_hat'G_hat is singular");
  // Solve (G'G) F' = G'Y rather than forming the inverse.
  return gram.ldlt().solve(G_hat.transpose() * Y_hat).transpose();
}

VectorXd QppcaEstimate::loading(const Eigen::Ref<const VectorXd>& x_raw) const {
  return evaluate_loading_function(basis, B_hat, standardizer.apply(x_raw));
}

MatrixXd QppcaEstimate::loading_grid(const Eigen::Ref<const MatrixXd>& X_raw) const {
  return evaluate_loading_grid(basis, B_hat, standardizer.apply_rows(X_raw));
}

SieveDesign build_design(const PanelData& panel, int k_n) {
  auto standardized = standardize_columns(panel.X, panel.characteristic_names);
  const int k = k_n > 0 ? k_n : default_basis_size(panel.X.rows());
  SieveDesign design;
  design.standardizer = std::move(standardized.transform);
  design.basis = fit_basis(standardized.matrix, k);
  design.Z = design.basis.design_matrix(standardized.matrix.values);
  return design;
}

QppcaEstimate estimate_from_fit(const SieveFit& fit, const SieveDesign& design, int R) {
  QppcaEstimate est;
  auto pcs = run_stage("extract_factors", [&] { return extract_factors(fit.Y_hat, R); });
  est.R = R;
  est.tau = fit.tau;
  est.F_hat = std::move(pcs.F_hat);
  est.G_hat = std::move(pcs.G_hat);
  est.Omega_hat = std::move(pcs.Omega_hat);
  est.spectrum = std::move(pcs.spectrum);
  est.rank_warning = pcs.rank_warning;
  est.gap_warning = pcs.gap_warning;
  est.B_hat = run_stage("recover_loading_coefficients",
                        [&] { return recover_loading_coefficients(fit.A_hat, est.F_hat); });
  est.F_tilde = run_stage("update_factors", [&] { return update_factors(fit.Y_hat, est.G_hat); });
  est.A_hat = fit.A_hat;
  est.Y_hat = fit.Y_hat;
  est.basis = design.basis;
  est.standardizer = design.standardizer;
  return est;
}

QppcaEstimate qppca_pipeline(const PanelData& panel, double tau, int k_n, int R, const PipelineOptions& options) {
  const auto design = run_stage("basis", [&] { return build_design(panel, k_n); });
  const auto fit = run_stage("quantile_regression",
                             [&] { return fit_quantile_panel(panel.Y, design.Z, tau, options.quantreg); });
  return estimate_from_fit(fit, design, R);
}

}  // namespace cqfm
