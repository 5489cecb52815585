#include "cqfm/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <boost/math/distributions/cauchy.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cqfm/error.hpp"
#include "cqfm/factor_count.hpp"
#include "parallel.hpp"

namespace cqfm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string to_string(ErrorDistribution e) {
  switch (e) {
    case ErrorDistribution::Normal: return "normal";
    case ErrorDistribution::StudentT3: return "t3";
    case ErrorDistribution::Cauchy: return "cauchy";
  }
  return "unknown";
}

std::string to_string(FactorProcess f) { return f == FactorProcess::AR1 ? "ar1" : "iid"; }

ErrorDistribution parse_error_distribution(const std::string& name) {
  const auto s = lowercase(name);
  if (s == "normal" || s == "gaussian") return ErrorDistribution::Normal;
  if (s == "t3" || s == "t" || s == "student_t3") return ErrorDistribution::StudentT3;
  if (s == "cauchy") return ErrorDistribution::Cauchy;
  throw InvalidArgument("unknown error distribution '" + name + "' (expected normal, t3 or cauchy)");
}

FactorProcess parse_factor_process(const std::string& name) {
  const auto s = lowercase(name);
  if (s == "iid" || s == "iid_normal") return FactorProcess::IidNormal;
  if (s == "ar1") return FactorProcess::AR1;
  throw InvalidArgument("unknown factor process '" + name + "' (expected iid or ar1)");
}

double error_quantile(ErrorDistribution dist, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("quantile level must lie in (0,1)");
  if (tau == 0.5) return 0.0;
  switch (dist) {
    case ErrorDistribution::Normal: return boost::math::quantile(boost::math::normal_distribution<>(), tau);
    case ErrorDistribution::StudentT3: return boost::math::quantile(boost::math::students_t_distribution<>(3.0), tau);
    case ErrorDistribution::Cauchy: return boost::math::quantile(boost::math::cauchy_distribution<>(), tau);
  }
  return 0.0;
}

LoadingFunction LoadingFunction::parse(const std::string& id) {
  LoadingFunction f;
  std::string rest = id;
  if (const auto star = rest.find('*'); star != std::string::npos) {
    try {
      f.coefficient = std::stod(rest.substr(0, star));
    } catch (const std::exception&) {
      throw InvalidArgument("bad loading function coefficient in '" + id + "'");
    }
    rest = rest.substr(star + 1);
  }
  const auto colon = rest.find(':');
  if (colon == std::string::npos) throw InvalidArgument("loading function '" + id + "' must look like name:d");
  f.name = lowercase(rest.substr(0, colon));
  try {
    f.characteristic = std::stoi(rest.substr(colon + 1)) - 1;
  } catch (const std::exception&) {
    throw InvalidArgument("bad characteristic index in loading function '" + id + "'");
  }
  static const char* known[] = {"linear", "centered_square", "cubic", "sin", "exp"};
  if (std::find(std::begin(known), std::end(known), f.name) == std::end(known))
    throw InvalidArgument("unknown loading function '" + f.name + "'");
  if (f.characteristic < 0) throw InvalidArgument("characteristic index must be >= 1 in '" + id + "'");
  return f;
}

std::string LoadingFunction::id() const {
  std::string base = name + ":" + std::to_string(characteristic + 1);
  if (coefficient == 1.0) return base;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", coefficient);
  return std::string(buf) + "*" + base;
}

double LoadingFunction::operator()(const Eigen::Ref<const VectorXd>& x) const {
  const double v = x(characteristic);
  double g = 0.0;
  if (name == "linear")
    g = v;
  else if (name == "centered_square")
    g = v * v - 1.0 / 3.0;
  else if (name == "cubic")
    g = v * v * v - 0.6 * v;
  else if (name == "sin")
    g = std::sin(std::numbers::pi * v);
  else if (name == "exp")
    g = std::exp(v) - std::sinh(1.0);
  return coefficient * g;
}

void DgpSpec::validate() const {
  if (n < 1) throw InvalidArgument("dgp: n must be >= 1");
  if (D < 1) throw InvalidArgument("dgp: D must be >= 1");
  if (R_loc < 0) throw InvalidArgument("dgp: R_loc must be >= 0");
  if (total_factors() < 1) throw InvalidArgument("dgp: need at least one factor");
  if (T < std::max<Index>(1, total_factors()))
    throw InvalidArgument("dgp: T must be >= max(1, number of factors)");
  if (!(noise_scale >= 0.0)) throw InvalidArgument("dgp: noise scale must be nonnegative");
  for (const auto& f : resolved_loadings())
    if (f.characteristic >= D)
      throw InvalidArgument("dgp: loading function '" + f.id() + "' refers to a missing characteristic");
}

std::vector<LoadingFunction> DgpSpec::resolved_loadings() const {
  std::vector<LoadingFunction> out;
  if (!loading_functions.empty()) {
    if (static_cast<int>(loading_functions.size()) < R_loc)
      throw InvalidArgument("dgp: fewer loading functions than location factors");
    for (int r = 0; r < R_loc; ++r) out.push_back(LoadingFunction::parse(loading_functions[r]));
    return out;
  }
  for (int r = 0; r < R_loc; ++r) {
    if (r == 0)
      out.push_back({"linear", 0, 1.0});
    else if (r == 1)
      out.push_back({"centered_square", D >= 2 ? 1 : 0, 1.0});
    else
      out.push_back({"sin", static_cast<int>(std::min<Index>(r, D - 1)), 1.0});
  }
  return out;
}

double scale_loading(const Eigen::Ref<const VectorXd>& x) { return 0.5 + 0.25 * x(0) * x(0); }

std::uint64_t replication_seed(std::uint64_t base, std::uint64_t rep) {
  return splitmix64(splitmix64(base) ^ (0xD1B54A32D192ED03ULL * (rep + 1)));
}

SimulatedPanel simulate_panel(const DgpSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  const Index T = spec.T;
  const Index D = spec.D;
  const auto loadings = spec.resolved_loadings();

  std::mt19937_64 rng(splitmix64(spec.seed));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> factor_noise(0.0, 1.0);
  std::normal_distribution<double> vol_noise(0.0, 1.0);

  SimulatedPanel sim;
  sim.spec = spec;
  auto& panel = sim.panel;
  panel.X.resize(n, D);
  for (Index i = 0; i < n; ++i)
    for (Index d = 0; d < D; ++d) panel.X(i, d) = unif(rng);

  const int R_total = spec.total_factors();
  sim.F_true.resize(T, R_total);
  sim.G_true.resize(n, R_total);
  for (int r = 0; r < spec.R_loc; ++r) {
    if (spec.factor_process == FactorProcess::AR1) {
      const double phi = 0.7;
      double f = factor_noise(rng);
      sim.F_true(0, r) = f;
      for (Index t = 1; t < T; ++t) {
        f = phi * f + std::sqrt(1.0 - phi * phi) * factor_noise(rng);
        sim.F_true(t, r) = f;
      }
    } else {
      for (Index t = 0; t < T; ++t) sim.F_true(t, r) = factor_noise(rng);
    }
    for (Index i = 0; i < n; ++i) sim.G_true(i, r) = loadings[r](panel.X.row(i).transpose());
  }
  VectorXd h = VectorXd::Ones(T);
  VectorXd s = VectorXd::Ones(n);
  if (spec.include_scale_factor) {
    for (Index t = 0; t < T; ++t) h(t) = std::exp(0.5 * vol_noise(rng));
    for (Index i = 0; i < n; ++i) s(i) = scale_loading(panel.X.row(i).transpose());
    sim.F_true.col(R_total - 1) = h;
    sim.G_true.col(R_total - 1) = s;
  }

  MatrixXd U(n, T);
  switch (spec.error_dist) {
    case ErrorDistribution::Normal: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < n; ++i) U(i, t) = dist(rng);
      break;
    }
    case ErrorDistribution::StudentT3: {
      std::student_t_distribution<double> dist(3.0);
      for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < n; ++i) U(i, t) = dist(rng);
      break;
    }
    case ErrorDistribution::Cauchy: {
      std::cauchy_distribution<double> dist(0.0, 1.0);
      for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < n; ++i) U(i, t) = dist(rng);
      break;
    }
  }

  const MatrixXd loc = sim.G_true.leftCols(spec.R_loc) * sim.F_true.leftCols(spec.R_loc).transpose();
  panel.Y = loc + spec.noise_scale * (s * h.transpose()).cwiseProduct(U);
  panel.validate();
  return sim;
}

double SimulatedPanel::quantile_shift(double tau) const {
  const double q = spec.noise_scale * error_quantile(spec.error_dist, tau);
  return std::abs(q) < 1e-14 ? 0.0 : q;
}

int SimulatedPanel::num_factors(double tau) const {
  return spec.R_loc + (quantile_shift(tau) != 0.0 ? 1 : 0);
}

TrueStructure SimulatedPanel::structure(double tau) const {
  const double q = quantile_shift(tau);
  const int R = num_factors(tau);
  TrueStructure out;
  out.G.resize(G_true.rows(), R);
  out.F.resize(F_true.rows(), R);
  out.G.leftCols(spec.R_loc) = G_true.leftCols(spec.R_loc);
  out.F.leftCols(spec.R_loc) = F_true.leftCols(spec.R_loc);
  if (R > spec.R_loc) {
    if (spec.include_scale_factor) {
      out.G.col(R - 1) = q * G_true.col(G_true.cols() - 1);
      out.F.col(R - 1) = F_true.col(F_true.cols() - 1);
    } else {
      // Without a scale factor the error quantile is a constant shift.
      out.G.col(R - 1).setConstant(q);
      out.F.col(R - 1).setOnes();
    }
  }
  return out;
}

MatrixXd SimulatedPanel::theta_true(double tau) const {
  const auto s = structure(tau);
  return s.G * s.F.transpose();
}

VectorXd SimulatedPanel::true_loading(double tau, const Eigen::Ref<const VectorXd>& x) const {
  const auto loadings = spec.resolved_loadings();
  const double q = quantile_shift(tau);
  const int R = num_factors(tau);
  VectorXd g(R);
  for (int r = 0; r < spec.R_loc; ++r) g(r) = loadings[r](x);
  if (R > spec.R_loc) g(R - 1) = spec.include_scale_factor ? q * scale_loading(x) : q;
  return g;
}

MatrixXd SimulatedPanel::true_loading_grid(double tau, const Eigen::Ref<const MatrixXd>& grid) const {
  MatrixXd out(grid.rows(), num_factors(tau));
  for (Index i = 0; i < grid.rows(); ++i) out.row(i) = true_loading(tau, grid.row(i).transpose()).transpose();
  return out;
}

double trace_r2(const Eigen::Ref<const MatrixXd>& F_true, const Eigen::Ref<const MatrixXd>& F_hat) {
  if (F_true.rows() != F_hat.rows()) throw InvalidArgument("trace_r2: factor series lengths differ");
  const double denom = F_true.squaredNorm();
  if (!(denom > 0.0)) throw InvalidArgument("trace_r2: true factors are zero");
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(F_hat);
  if (qr.rank() < F_hat.cols()) throw RankDeficient("trace_r2: estimated factors are rank deficient");
  // Projection of F_true onto span(F_hat) through the thin Q factor.
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(F_hat.rows(), F_hat.cols());
  const double num = (Q.transpose() * F_true).squaredNorm();
  return std::clamp(num / denom, 0.0, 1.0);
}

MatrixXd rotation_align(const Eigen::Ref<const MatrixXd>& G_true, const Eigen::Ref<const MatrixXd>& F_true,
                        const Eigen::Ref<const MatrixXd>& F_hat, const Eigen::Ref<const VectorXd>& Omega_hat) {
  if (F_true.cols() != F_hat.cols() || G_true.cols() != F_true.cols() || Omega_hat.size() != F_hat.cols())
    throw InvalidArgument("rotation_align: factor counts differ");
  if ((Omega_hat.array() <= 0.0).any()) throw RankDeficient("rotation_align: Omega_hat is singular");
  const double n = static_cast<double>(G_true.rows());
  const double T = static_cast<double>(F_true.rows());
  const MatrixXd sigma_g = G_true.transpose() * G_true / n;
  return sigma_g * (F_true.transpose() * F_hat / T) * Omega_hat.cwiseInverse().asDiagonal();
}

double alignment_error(const Eigen::Ref<const MatrixXd>& F_true, const Eigen::Ref<const MatrixXd>& F_hat,
                       const Eigen::Ref<const MatrixXd>& H_hat) {
  return (F_hat - F_true * H_hat).norm() / std::sqrt(static_cast<double>(F_true.rows()));
}

MatrixXd procrustes_align(const Eigen::Ref<const MatrixXd>& F_true, const Eigen::Ref<const MatrixXd>& F_hat) {
  const Eigen::JacobiSVD<MatrixXd> svd(F_true.transpose() * F_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

LoadingError loading_grid_rmse(const Eigen::Ref<const MatrixXd>& g_hat_grid, const Eigen::Ref<const MatrixXd>& g_true_grid,
                               const Eigen::Ref<const MatrixXd>& H_hat) {
  if (g_hat_grid.rows() != g_true_grid.rows() || g_hat_grid.cols() != H_hat.rows() ||
      g_true_grid.cols() != H_hat.cols() || H_hat.rows() != H_hat.cols())
    throw InvalidArgument("loading_grid_rmse: shapes do not conform");
  const Eigen::FullPivLU<MatrixXd> lu(H_hat);
  if (!lu.isInvertible()) throw RankDeficient("loading_grid_rmse: H_hat is singular");
  // Rows of g_true * H^{-T} are H^{-1} g(x).
  const MatrixXd target = lu.solve(g_true_grid.transpose()).transpose();
  const MatrixXd diff = g_hat_grid - target;
  LoadingError out;
  out.rmse = (diff.colwise().squaredNorm() / static_cast<double>(diff.rows())).cwiseSqrt().transpose();
  out.sup = diff.rowwise().norm().maxCoeff();
  return out;
}

LoadingError loading_grid_rmse(const QppcaEstimate& estimate, const Eigen::Ref<const MatrixXd>& H_hat,
                               const SimulatedPanel& sim, double tau, const Eigen::Ref<const MatrixXd>& grid) {
  return loading_grid_rmse(estimate.loading_grid(grid), sim.true_loading_grid(tau, grid), H_hat);
}

MatrixXd characteristic_grid(const Eigen::Ref<const MatrixXd>& X, int points) {
  if (points < 1) throw InvalidArgument("grid: need at least one point");
  const Index D = X.cols();
  const VectorXd lo = X.colwise().minCoeff();
  const VectorXd hi = X.colwise().maxCoeff();
  auto coordinate = [&](Index d, int k) {
    return points == 1 ? 0.5 * (lo(d) + hi(d)) : lo(d) + (hi(d) - lo(d)) * k / (points - 1.0);
  };
  if (std::pow(static_cast<double>(points), static_cast<double>(D)) <= 10000.0) {
    Index total = 1;
    for (Index d = 0; d < D; ++d) total *= points;
    MatrixXd grid(total, D);
    for (Index row = 0; row < total; ++row) {
      Index rest = row;
      for (Index d = 0; d < D; ++d) {
        grid(row, d) = coordinate(d, static_cast<int>(rest % points));
        rest /= points;
      }
    }
    return grid;
  }
  const VectorXd center = X.colwise().mean();
  MatrixXd grid(D * points, D);
  for (Index d = 0; d < D; ++d)
    for (int k = 0; k < points; ++k) {
      grid.row(d * points + k) = center.transpose();
      grid(d * points + k, d) = coordinate(d, k);
    }
  return grid;
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

const MethodSummary& MetricsReport::summary(Method m, double tau) const {
  for (const auto& s : summaries)
    if (s.method == m && (m != Method::QPPCA || s.tau == tau)) return s;
  throw InvalidArgument("no summary for method " + to_string(m));
}

namespace {

// Fills the accuracy metrics of a record against the truth at quantile tau.
void score(ReplicationRecord& rec, const SimulatedPanel& sim, double tau, const MatrixXd& F_hat,
           const VectorXd& Omega_hat, const QppcaEstimate* projected, const MatrixXd& grid) {
  const auto truth = sim.structure(tau);
  rec.R_true = static_cast<int>(truth.F.cols());
  rec.loading_rmse = VectorXd::Constant(rec.R_used, kNaN);
  rec.loading_sup = kNaN;
  rec.alignment_error = kNaN;
  if (truth.F.cols() == 0) {
    rec.trace_r2 = kNaN;
    return;
  }
  rec.trace_r2 = trace_r2(truth.F, F_hat);
  if (truth.F.cols() != F_hat.cols()) return;
  const MatrixXd H = rotation_align(truth.G, truth.F, F_hat, Omega_hat);
  rec.alignment_error = alignment_error(truth.F, F_hat, H);
  if (projected != nullptr) {
    const auto err = loading_grid_rmse(*projected, H, sim, tau, grid);
    rec.loading_rmse = err.rmse;
    rec.loading_sup = err.sup;
  }
}

std::vector<ReplicationRecord> run_replication(const MonteCarloConfig& config, int rep) {
  DgpSpec spec = config.spec;
  spec.seed = replication_seed(config.spec.seed, static_cast<std::uint64_t>(rep));
  const auto sim = simulate_panel(spec);
  const auto& panel = sim.panel;
  const auto design = build_design(panel, config.k_n);
  const MatrixXd grid = characteristic_grid(panel.X, config.grid_points);
  QuantRegOptions qr = config.quantreg;
  qr.threads = 1;

  auto R_for = [&](double tau) {
    const int R = config.R > 0 ? config.R : sim.num_factors(tau);
    return std::max(R, 1);
  };

  std::vector<ReplicationRecord> out;
  for (double tau : config.taus) {
    if (std::find(config.methods.begin(), config.methods.end(), Method::QPPCA) == config.methods.end()) break;
    ReplicationRecord rec;
    rec.rep = rep;
    rec.method = Method::QPPCA;
    rec.tau = tau;
    rec.R_used = R_for(tau);
    const auto fit = fit_quantile_panel(panel.Y, design.Z, tau, qr);
    const auto count = select_num_factors(fit, config.R_bar, config.d, config.exponent);
    rec.R_rank_min = count.R_rank_min;
    rec.R_eigen_ratio = count.R_eigen_ratio;
    const auto est = estimate_from_fit(fit, design, rec.R_used);
    score(rec, sim, tau, est.F_hat, est.Omega_hat, &est, grid);
    out.push_back(std::move(rec));
  }
  for (Method m : config.methods) {
    if (m == Method::QPPCA) continue;
    ReplicationRecord rec;
    rec.rep = rep;
    rec.method = m;
    rec.tau = 0.5;
    rec.R_used = R_for(0.5);
    if (m == Method::PPCA) {
      const auto fit = fit_least_squares_panel(panel.Y, design.Z);
      const auto count = select_num_factors(fit, config.R_bar, config.d, config.exponent);
      rec.R_rank_min = count.R_rank_min;
      rec.R_eigen_ratio = count.R_eigen_ratio;
      const auto est = estimate_from_fit(fit, design, rec.R_used);
      score(rec, sim, 0.5, est.F_hat, est.Omega_hat, &est, grid);
    } else {
      const auto count = select_from_spectrum(panel_spectrum(panel.Y), panel.Y.rows(), panel.Y.cols(),
                                              config.R_bar, config.d, config.exponent);
      rec.R_rank_min = count.R_rank_min;
      rec.R_eigen_ratio = count.R_eigen_ratio;
      const auto est = pca_pipeline(panel.Y, rec.R_used);
      score(rec, sim, 0.5, est.F_hat, est.eigenvalues, nullptr, grid);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ReplicationRecord> failed_records(const MonteCarloConfig& config, int rep, const std::string& what) {
  std::vector<ReplicationRecord> out;
  auto make = [&](Method m, double tau) {
    ReplicationRecord rec;
    rec.rep = rep;
    rec.method = m;
    rec.tau = tau;
    rec.ok = false;
    rec.error = what;
    rec.trace_r2 = rec.alignment_error = rec.loading_sup = kNaN;
    out.push_back(std::move(rec));
  };
  if (std::find(config.methods.begin(), config.methods.end(), Method::QPPCA) != config.methods.end())
    for (double tau : config.taus) make(Method::QPPCA, tau);
  for (Method m : config.methods)
    if (m != Method::QPPCA) make(m, 0.5);
  return out;
}

MethodSummary summarize(Method m, double tau, const std::vector<const ReplicationRecord*>& recs) {
  MethodSummary s;
  s.method = m;
  s.tau = tau;
  std::vector<double> r2, align, rmse, sup;
  int hits_rank = 0;
  int hits_ratio = 0;
  std::map<int, int> votes;
  for (const auto* rec : recs) {
    if (!rec->ok) {
      ++s.n_failed;
      continue;
    }
    ++s.n_ok;
    r2.push_back(rec->trace_r2);
    align.push_back(rec->alignment_error);
    rmse.push_back(rec->loading_rmse.size() > 0 ? rec->loading_rmse.mean() : kNaN);
    sup.push_back(rec->loading_sup);
    hits_rank += rec->R_rank_min == rec->R_true;
    hits_ratio += rec->R_eigen_ratio == rec->R_true;
    ++votes[rec->R_rank_min];
  }
  auto mean = [](const std::vector<double>& v) {
    double total = 0.0;
    int count = 0;
    for (double x : v)
      if (!std::isnan(x)) {
        total += x;
        ++count;
      }
    return count > 0 ? total / count : kNaN;
  };
  s.trace_r2_mean = mean(r2);
  s.trace_r2_median = median(r2);
  s.alignment_error_mean = mean(align);
  s.alignment_error_median = median(align);
  s.loading_rmse_mean = mean(rmse);
  s.loading_sup_median = median(sup);
  if (s.n_ok > 0) {
    s.rank_min_accuracy = static_cast<double>(hits_rank) / s.n_ok;
    s.eigen_ratio_accuracy = static_cast<double>(hits_ratio) / s.n_ok;
  }
  int best_votes = -1;
  for (const auto& [value, count] : votes)
    if (count > best_votes) {
      best_votes = count;
      s.rank_min_mode = value;
    }
  return s;
}

}  // namespace

MetricsReport run_monte_carlo(const MonteCarloConfig& config) {
  if (config.n_reps < 1) throw InvalidArgument("monte carlo: n_reps must be >= 1");
  if (config.methods.empty()) throw InvalidArgument("monte carlo: no methods requested");
  for (double tau : config.taus)
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("monte carlo: quantile levels must lie in (0,1)");
  config.spec.validate();

  const auto reps = static_cast<std::size_t>(config.n_reps);
  std::vector<std::vector<ReplicationRecord>> per_rep(reps);
  const unsigned threads = config.parallel ? config.threads : 1;
  detail::parallel_for(reps, threads, [&](std::size_t r) {
    try {
      per_rep[r] = run_replication(config, static_cast<int>(r));
    } catch (const std::exception& e) {
      per_rep[r] = failed_records(config, static_cast<int>(r), e.what());
    }
  });

  MetricsReport report;
  report.n_reps = config.n_reps;
  for (auto& recs : per_rep) {
    if (std::any_of(recs.begin(), recs.end(), [](const auto& r) { return !r.ok; })) ++report.failed_reps;
    for (auto& rec : recs) report.records.push_back(std::move(rec));
  }
  if (report.failed_reps * 10 > config.n_reps)
    throw Error("monte carlo: " + std::to_string(report.failed_reps) + " of " + std::to_string(config.n_reps) +
                " replications failed");

  auto collect = [&](Method m, double tau) {
    std::vector<const ReplicationRecord*> recs;
    for (const auto& rec : report.records)
      if (rec.method == m && (m != Method::QPPCA || rec.tau == tau)) recs.push_back(&rec);
    return recs;
  };
  if (std::find(config.methods.begin(), config.methods.end(), Method::QPPCA) != config.methods.end())
    for (double tau : config.taus) report.summaries.push_back(summarize(Method::QPPCA, tau, collect(Method::QPPCA, tau)));
  for (Method m : config.methods)
    if (m != Method::QPPCA) report.summaries.push_back(summarize(m, 0.5, collect(m, 0.5)));
  return report;
}

}  // namespace cqfm
