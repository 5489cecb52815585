#ifndef CQFM_SIMULATE_HPP
#define CQFM_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqfm/baselines.hpp"
#include "cqfm/panel.hpp"
#include "cqfm/qppca.hpp"
#include "cqfm/quantreg.hpp"

namespace cqfm {

enum class ErrorDistribution { Normal, StudentT3, Cauchy };
enum class FactorProcess { IidNormal, AR1 };

std::string to_string(ErrorDistribution e);
std::string to_string(FactorProcess f);
ErrorDistribution parse_error_distribution(const std::string& name);
FactorProcess parse_factor_process(const std::string& name);

/// tau-quantile of the standardized error distribution.
double error_quantile(ErrorDistribution dist, double tau);

/// A loading function of one characteristic, written "[c*]name:d" with d
/// 1-based, e.g. "linear:1", "centered_square:2", "2*sin:1".
///   linear          x_d
///   centered_square x_d^2 - 1/3
///   cubic           x_d^3 - 0.6 x_d
///   sin             sin(pi x_d)
///   exp             exp(x_d) - sinh(1)
struct LoadingFunction {
  std::string name;
  int characteristic = 0;  ///< 0-based
  double coefficient = 1.0;

  static LoadingFunction parse(const std::string& id);
  std::string id() const;
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct DgpSpec {
  Eigen::Index n = 500;
  Eigen::Index T = 10;
  Eigen::Index D = 2;
  int R_loc = 2;
  bool include_scale_factor = false;
  /// Empty selects the defaults: linear in x_1, then a centered square in
  /// x_2 (x_1 when D = 1), then sin of later characteristics.
  std::vector<std::string> loading_functions;
  ErrorDistribution error_dist = ErrorDistribution::Normal;
  FactorProcess factor_process = FactorProcess::IidNormal;
  /// Multiplies the idiosyncratic term; 0 gives a noiseless panel.
  double noise_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<LoadingFunction> resolved_loadings() const;
  int total_factors() const { return R_loc + (include_scale_factor ? 1 : 0); }
};

/// Scale loading 0.5 + 0.25 x_1^2.
double scale_loading(const Eigen::Ref<const Eigen::VectorXd>& x);

struct TrueStructure {
  Eigen::MatrixXd G;  ///< n x R(tau)
  Eigen::MatrixXd F;  ///< T x R(tau)
};

struct SimulatedPanel {
  PanelData panel;
  DgpSpec spec;
  Eigen::MatrixXd F_true;  ///< T x total_factors(): location factors, then h_t
  Eigen::MatrixXd G_true;  ///< n x total_factors(): g_r(x_i), then s(x_i)

  /// Number of factors in the tau-th conditional quantile surface.
  int num_factors(double tau) const;
  /// Factor structure of theta_0t(x) = Q_tau[y_it | x_i] at quantile tau.
  TrueStructure structure(double tau) const;
  /// True conditional-quantile surface, n x T.
  Eigen::MatrixXd theta_true(double tau) const;
  /// Loading vector of structure(tau) at a raw characteristic vector.
  Eigen::VectorXd true_loading(double tau, const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd true_loading_grid(double tau, const Eigen::Ref<const Eigen::MatrixXd>& grid) const;

 private:
  double quantile_shift(double tau) const;
};

/// Deterministic in spec.seed.
SimulatedPanel simulate_panel(const DgpSpec& spec);

/// Seed of replication `rep`, derived from the base seed by a counter hash.
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t rep);

/// tr[F'P F] / tr[F'F] where P projects onto the columns of F_hat.
double trace_r2(const Eigen::Ref<const Eigen::MatrixXd>& F_true, const Eigen::Ref<const Eigen::MatrixXd>& F_hat);

/// H = Sigma_g (F'F_hat/T) Omega^{-1} with Sigma_g = G'G/n.
Eigen::MatrixXd rotation_align(const Eigen::Ref<const Eigen::MatrixXd>& G_true,
                               const Eigen::Ref<const Eigen::MatrixXd>& F_true,
                               const Eigen::Ref<const Eigen::MatrixXd>& F_hat,
                               const Eigen::Ref<const Eigen::VectorXd>& Omega_hat);

/// ||F_hat - F H|| / sqrt(T).
double alignment_error(const Eigen::Ref<const Eigen::MatrixXd>& F_true, const Eigen::Ref<const Eigen::MatrixXd>& F_hat,
                       const Eigen::Ref<const Eigen::MatrixXd>& H_hat);

/// Orthogonal Procrustes rotation Q minimizing ||F_true Q - F_hat||.
Eigen::MatrixXd procrustes_align(const Eigen::Ref<const Eigen::MatrixXd>& F_true,
                                 const Eigen::Ref<const Eigen::MatrixXd>& F_hat);

struct LoadingError {
  Eigen::VectorXd rmse;  ///< per factor
  double sup = 0.0;      ///< max over the grid of ||g_hat(x) - H^{-1} g(x)||
};

/// Compares estimated loadings (m x R) with H^{-1} applied to the true
/// loadings (m x R), row by row.
LoadingError loading_grid_rmse(const Eigen::Ref<const Eigen::MatrixXd>& g_hat_grid,
                               const Eigen::Ref<const Eigen::MatrixXd>& g_true_grid,
                               const Eigen::Ref<const Eigen::MatrixXd>& H_hat);

LoadingError loading_grid_rmse(const QppcaEstimate& estimate, const Eigen::Ref<const Eigen::MatrixXd>& H_hat,
                               const SimulatedPanel& sim, double tau, const Eigen::Ref<const Eigen::MatrixXd>& grid);

/// Evaluation grid inside the observed characteristic ranges: a full
/// product grid when points^D <= 10000, otherwise one-dimensional slices
/// through the column means.
Eigen::MatrixXd characteristic_grid(const Eigen::Ref<const Eigen::MatrixXd>& X, int points);

struct MonteCarloConfig {
  DgpSpec spec;
  std::vector<Method> methods{Method::QPPCA, Method::PPCA, Method::PCA};
  std::vector<double> taus{0.5};
  int n_reps = 100;
  bool parallel = false;
  unsigned threads = 0;
  int k_n = 0;     ///< 0: default rule
  int R = 0;       ///< 0: number of true factors at each quantile
  int R_bar = 0;   ///< 0: default rule
  double d = 0.25;
  double exponent = -0.25;
  int grid_points = 21;
  QuantRegOptions quantreg;
};

struct ReplicationRecord {
  int rep = 0;
  Method method = Method::QPPCA;
  double tau = 0.5;  ///< quantile for QPPCA; 0.5 reference for mean-based methods
  int R_true = 0;
  int R_used = 0;
  double trace_r2 = 0.0;
  double alignment_error = 0.0;
  Eigen::VectorXd loading_rmse;
  double loading_sup = 0.0;
  int R_rank_min = 0;
  int R_eigen_ratio = 0;
  bool ok = true;
  std::string error;
};

struct MethodSummary {
  Method method = Method::QPPCA;
  double tau = 0.5;
  int n_ok = 0;
  int n_failed = 0;
  double trace_r2_mean = 0.0;
  double trace_r2_median = 0.0;
  double alignment_error_mean = 0.0;
  double alignment_error_median = 0.0;
  double loading_rmse_mean = 0.0;  ///< NaN when loadings are not functions (PCA)
  double loading_sup_median = 0.0;
  double rank_min_accuracy = 0.0;
  double eigen_ratio_accuracy = 0.0;
  /// Most frequent R_rank_min (ties to the smaller value).
  int rank_min_mode = 0;
};

struct MetricsReport {
  std::vector<ReplicationRecord> records;  ///< ordered by (rep, tau, method)
  std::vector<MethodSummary> summaries;
  int n_reps = 0;
  int failed_reps = 0;

  const MethodSummary& summary(Method m, double tau) const;
};

/// Runs n_reps independent replications, replication r drawing from
/// replication_seed(spec.seed, r). Results are identical with or without
/// parallelism. Throws when more than 10% of replications fail.
MetricsReport run_monte_carlo(const MonteCarloConfig& config);

double median(std::vector<double> values);

}  // namespace cqfm

#endif  // CQFM_SIMULATE_HPP
