#include "cqfm/baselines.hpp"

#include <algorithm>
#include <cctype>

#include "cqfm/error.hpp"

namespace cqfm {

std::string to_string(Method m) {
  switch (m) {
    case Method::QPPCA: return "qppca";
    case Method::PPCA: return "ppca";
    case Method::PCA: return "pca";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "qppca") return Method::QPPCA;
  if (lower == "ppca") return Method::PPCA;
  if (lower == "pca") return Method::PCA;
  throw InvalidArgument("unknown method '" + name + "' (expected qppca, ppca or pca)");
}

BaselineEstimate ppca_pipeline(const PanelData& panel, int k_n, int R) {
  SieveDesign design;
  SieveFit fit;
  try {
    design = build_design(panel, k_n);
  } catch (const Error& e) {
    throw StageError("basis", e.what());
  }
  try {
    fit = fit_least_squares_panel(panel.Y, design.Z);
  } catch (const Error& e) {
    throw StageError("least_squares", e.what());
  }
  auto est = estimate_from_fit(fit, design, R);

  BaselineEstimate out;
  out.method = Method::PPCA;
  out.F_hat = est.F_hat;
  out.G_or_Lambda_hat = est.G_hat;
  out.B_hat = est.B_hat;
  out.eigenvalues = est.Omega_hat;
  out.spectrum = est.spectrum;
  out.rank_warning = est.rank_warning;
  out.gap_warning = est.gap_warning;
  out.projected = std::move(est);
  return out;
}

BaselineEstimate pca_pipeline(const Eigen::Ref<const Eigen::MatrixXd>& Y, int R, bool demean) {
  Eigen::MatrixXd centered = Y;
  if (demean) centered.rowwise() -= Y.colwise().mean();
  auto pcs = extract_factors(centered, R);
  BaselineEstimate out;
  out.method = Method::PCA;
  out.F_hat = std::move(pcs.F_hat);
  out.G_or_Lambda_hat = std::move(pcs.G_hat);
  out.eigenvalues = std::move(pcs.Omega_hat);
  out.spectrum = std::move(pcs.spectrum);
  out.rank_warning = pcs.rank_warning;
  out.gap_warning = pcs.gap_warning;
  return out;
}

BaselineEstimate pca_pipeline(const PanelData& panel, int R, bool demean) {
  return pca_pipeline(panel.Y, R, demean);
}

}  // namespace cqfm
