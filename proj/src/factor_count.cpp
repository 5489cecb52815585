#include "cqfm/factor_count.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqfm/error.hpp"
#include "cqfm/qppca.hpp"

namespace cqfm {

int rank_min_estimate(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues, double p_n) {
  return static_cast<int>((eigenvalues.array() > p_n).count());
}

double default_threshold(double rho_1, long n, long T, double d, double exponent) {
  if (T < 2) throw InvalidArgument("threshold: T must be >= 2 (ln T must be positive)");
  if (n < 2) throw InvalidArgument("threshold: n must be >= 2");
  if (!(d > 0.0)) throw InvalidArgument("threshold: d must be positive");
  if (!(rho_1 > 0.0)) throw InvalidArgument("threshold: largest eigenvalue must be positive");
  return d * std::sqrt(rho_1) * std::pow(static_cast<double>(n), exponent) * std::log(static_cast<double>(T));
}

int eigen_ratio_estimate(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues) {
  if (eigenvalues.size() < 2) throw InvalidArgument("eigen ratio: need at least 2 eigenvalues");
  const double top = eigenvalues(0);
  if (!(top > 0.0)) throw InvalidArgument("eigen ratio: largest eigenvalue must be positive");
  const double floor = 1e-12 * top;
  int best = 1;
  double best_ratio = -1.0;
  for (Eigen::Index j = 0; j + 1 < eigenvalues.size(); ++j) {
    const double ratio = std::max(eigenvalues(j), floor) / std::max(eigenvalues(j + 1), floor);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(j + 1);
    }
  }
  return best;
}

int default_max_factors(Eigen::Index T) { return static_cast<int>(std::min<Eigen::Index>(8, T - 1)); }

FactorCountResult select_from_spectrum(const Eigen::Ref<const Eigen::VectorXd>& spectrum, Eigen::Index n,
                                       Eigen::Index T, int R_bar, double d, double exponent) {
  if (T < 2) throw InvalidArgument("select_num_factors: T must be >= 2");
  FactorCountResult out;
  out.R_bar = R_bar > 0 ? R_bar : default_max_factors(T);
  if (out.R_bar < 1) throw InvalidArgument("select_num_factors: R_bar must be >= 1");
  if (out.R_bar + 1 > std::min(n, T))
    throw InvalidArgument("select_num_factors: R_bar + 1 = " + std::to_string(out.R_bar + 1) +
                          " exceeds min(n, T) = " + std::to_string(std::min(n, T)));
  if (spectrum.size() < out.R_bar + 1) throw InvalidArgument("select_num_factors: spectrum too short");
  out.spectrum = spectrum;
  out.d = d;
  out.exponent = exponent;
  out.p_n = default_threshold(spectrum(0), static_cast<long>(n), static_cast<long>(T), d, exponent);
  out.R_rank_min = rank_min_estimate(spectrum.head(out.R_bar), out.p_n);
  out.R_eigen_ratio = eigen_ratio_estimate(spectrum.head(out.R_bar + 1));
  return out;
}

FactorCountResult select_num_factors(const SieveFit& fit, int R_bar, double d, double exponent) {
  return select_from_spectrum(panel_spectrum(fit.Y_hat), fit.Y_hat.rows(), fit.Y_hat.cols(), R_bar, d, exponent);
}

}  // namespace cqfm
