#include "cqfm/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cqfm/error.hpp"
#include "cqfm/factor_count.hpp"
#include "cqfm/panel_io.hpp"
#include "cqfm/qppca.hpp"

namespace cqfm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

class StageClock {
 public:
  void mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    timings_[stage] = timings_.value(stage, 0.0) + std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  const json& timings() const { return timings_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  json timings_ = json::object();
};

json methods_json(const std::vector<Method>& methods) {
  json out = json::array();
  for (Method m : methods) out.push_back(to_string(m));
  return out;
}

json spec_json(const DgpSpec& spec) {
  json loadings = json::array();
  for (const auto& f : spec.resolved_loadings()) loadings.push_back(f.id());
  return {{"n", spec.n},
          {"T", spec.T},
          {"D", spec.D},
          {"R_loc", spec.R_loc},
          {"include_scale_factor", spec.include_scale_factor},
          {"loading_functions", loadings},
          {"error_dist", to_string(spec.error_dist)},
          {"factor_process", to_string(spec.factor_process)},
          {"noise_scale", spec.noise_scale},
          {"seed", spec.seed}};
}

json config_json(const RunConfig& c) {
  return {{"taus", c.taus},
          {"k_n", c.k_n},
          {"R", c.R ? json(*c.R) : json(nullptr)},
          {"R_bar", c.R_bar},
          {"d", c.d},
          {"exponent", c.exponent},
          {"rule", to_string(c.rule)},
          {"tol", c.tol},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed},
          {"methods", c.methods},
          {"output_dir", c.output_dir.string()},
          {"demean", c.demean},
          {"threads", c.threads},
          {"grid_points", c.grid_points},
          {"returns", c.returns_csv.string()},
          {"characteristics", c.characteristics_csv.string()},
          {"n_reps", c.n_reps},
          {"parallel", c.parallel},
          {"mc_grid_points", c.mc_grid_points}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string tau_label(double tau) { return "qppca_tau" + format_double(tau); }

QuantRegOptions quantreg_options(const RunConfig& c) {
  QuantRegOptions o;
  o.tol = c.tol;
  o.max_iterations = c.max_iterations;
  o.threads = c.threads;
  return o;
}

int chosen_rank(const RunConfig& c, const FactorCountResult& count) {
  if (c.R) return *c.R;
  const int r = c.rule == SelectionRule::RankMin ? count.R_rank_min : count.R_eigen_ratio;
  return std::max(r, 1);
}

// Leading eigenvalues, threshold and both rank estimates per method and tau.
struct FactorCountTable {
  explicit FactorCountTable(Index T) : shown(std::min<Index>(5, T)) {
    table.header = {"method", "tau"};
    for (Index j = 0; j < shown; ++j) table.header.push_back("rho_" + std::to_string(j + 1));
    table.header.insert(table.header.end(), {"p_n", "R_rank_min", "R_eigen_ratio", "R_used"});
  }
  void add(const std::string& method, const std::string& tau, const FactorCountResult& count, int R_used) {
    std::vector<std::string> row{method, tau};
    for (Index j = 0; j < shown; ++j) row.push_back(format_double(count.spectrum(j)));
    row.push_back(format_double(count.p_n));
    row.push_back(std::to_string(count.R_rank_min));
    row.push_back(std::to_string(count.R_eigen_ratio));
    row.push_back(std::to_string(R_used));
    table.rows.push_back(std::move(row));
  }
  Index shown;
  CsvTable table;
};

void write_factors(const fs::path& path, const std::vector<std::string>& time_ids, const MatrixXd& F_hat,
                   const MatrixXd& F_tilde) {
  CsvTable t;
  t.header = {"time_id"};
  for (Index r = 0; r < F_hat.cols(); ++r) t.header.push_back("F_hat_" + std::to_string(r + 1));
  for (Index r = 0; r < F_tilde.cols(); ++r) t.header.push_back("F_tilde_" + std::to_string(r + 1));
  for (Index s = 0; s < F_hat.rows(); ++s) {
    std::vector<std::string> row{time_ids[static_cast<std::size_t>(s)]};
    for (Index r = 0; r < F_hat.cols(); ++r) row.push_back(format_double(F_hat(s, r)));
    for (Index r = 0; r < F_tilde.cols(); ++r) row.push_back(format_double(F_tilde(s, r)));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

// One block of grid points per characteristic, the others held at 0 (the
// standardized mean).
void write_loadings(const fs::path& path, const QppcaEstimate& est, const std::vector<std::string>& names,
                    int points) {
  CsvTable t;
  t.header = {"characteristic", "x"};
  for (int r = 0; r < est.R; ++r) t.header.push_back("g_" + std::to_string(r + 1));
  const int D = est.basis.num_characteristics();
  VectorXd x = VectorXd::Zero(D);
  for (int d = 0; d < D; ++d) {
    const double lo = est.basis.lower()(d);
    const double hi = est.basis.upper()(d);
    for (int k = 0; k < points; ++k) {
      x.setZero();
      x(d) = lo + (hi - lo) * k / (points - 1.0);
      const VectorXd g = evaluate_loading_function(est.basis, est.B_hat, x);
      std::vector<std::string> row{names[static_cast<std::size_t>(d)], format_double(x(d))};
      for (Index r = 0; r < g.size(); ++r) row.push_back(format_double(g(r)));
      t.rows.push_back(std::move(row));
    }
  }
  write_csv(path, t);
}

double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd ca = a.array() - a.mean();
  const VectorXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return denom > 0.0 ? ca.dot(cb) / denom : std::nan("");
}

json estimate_json(const std::string& label, double tau, const FactorCountResult& count, int R_used,
                   bool rank_warning, bool gap_warning, const std::vector<double>& kkt) {
  double worst = 0.0;
  for (double k : kkt) worst = std::max(worst, k);
  return {{"label", label},
          {"tau", std::isnan(tau) ? json(nullptr) : json(tau)},
          {"R_used", R_used},
          {"R_rank_min", count.R_rank_min},
          {"R_eigen_ratio", count.R_eigen_ratio},
          {"p_n", count.p_n},
          {"rank_warning", rank_warning},
          {"gap_warning", gap_warning},
          {"max_kkt_residual", worst}};
}

PanelData load_for(const RunConfig& config) {
  if (config.returns_csv.empty() || config.characteristics_csv.empty())
    throw InvalidArgument("config: both returns and characteristics files are required");
  return load_panel(config.returns_csv, config.characteristics_csv);
}

template <typename Fn>
auto at_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

CommandResult cmd_fit(const RunConfig& config) {
  config.validate();
  const auto methods = config.resolved_methods({Method::QPPCA, Method::PPCA});
  StageClock clock;
  const PanelData panel = at_stage("load", [&] { return load_for(config); });
  clock.mark("load");
  const SieveDesign design = at_stage("basis", [&] { return build_design(panel, config.k_n); });
  clock.mark("basis");
  fs::create_directories(config.output_dir);

  CommandResult result;
  FactorCountTable counts(panel.num_periods());
  std::vector<std::pair<std::string, VectorXd>> first_factors;
  json estimates = json::array();
  auto out_path = [&](const std::string& name) {
    result.files.push_back(config.output_dir / name);
    return result.files.back();
  };

  const auto qr = quantreg_options(config);
  for (Method m : methods) {
    if (m == Method::QPPCA) {
      for (double tau : config.taus) {
        const std::string label = tau_label(tau);
        const auto fit = at_stage(label + " quantile_regression",
                                  [&] { return fit_quantile_panel(panel.Y, design.Z, tau, qr); });
        const auto count = at_stage(label + " select_rank",
                                    [&] { return select_num_factors(fit, config.R_bar, config.d, config.exponent); });
        const int R = chosen_rank(config, count);
        const auto est = at_stage(label + " estimate", [&] { return estimate_from_fit(fit, design, R); });
        counts.add("qppca", format_double(tau), count, R);
        write_factors(out_path("factors_" + label + ".csv"), panel.time_ids, est.F_hat, est.F_tilde);
        write_loadings(out_path("loadings_" + label + ".csv"), est, panel.characteristic_names, config.grid_points);
        write_unit_panel(out_path("quantile_returns_" + label + ".csv"), est.Y_hat, panel.unit_ids, panel.time_ids);
        first_factors.emplace_back("tau=" + format_double(tau), est.F_hat.col(0));
        estimates.push_back(
            estimate_json(label, tau, count, R, est.rank_warning, est.gap_warning, fit.kkt_residuals));
        clock.mark(label);
      }
    } else if (m == Method::PPCA) {
      const auto fit = at_stage("ppca least_squares", [&] { return fit_least_squares_panel(panel.Y, design.Z); });
      const auto count = at_stage("ppca select_rank",
                                  [&] { return select_num_factors(fit, config.R_bar, config.d, config.exponent); });
      const int R = chosen_rank(config, count);
      const auto est = at_stage("ppca estimate", [&] { return estimate_from_fit(fit, design, R); });
      counts.add("ppca", "mean", count, R);
      write_factors(out_path("factors_ppca.csv"), panel.time_ids, est.F_hat, est.F_tilde);
      write_loadings(out_path("loadings_ppca.csv"), est, panel.characteristic_names, config.grid_points);
      first_factors.emplace_back("PPCA", est.F_hat.col(0));
      estimates.push_back(estimate_json("ppca", std::nan(""), count, R, est.rank_warning, est.gap_warning, {}));
      clock.mark("ppca");
    } else {
      const auto count = at_stage("pca select_rank", [&] {
        return select_from_spectrum(panel_spectrum(panel.Y), panel.num_units(), panel.num_periods(), config.R_bar,
                                    config.d, config.exponent);
      });
      const int R = chosen_rank(config, count);
      const auto est = at_stage("pca estimate", [&] { return pca_pipeline(panel, R, config.demean); });
      counts.add("pca", "mean", count, R);
      write_factors(out_path("factors_pca.csv"), panel.time_ids, est.F_hat, MatrixXd());
      first_factors.emplace_back("PCA", est.F_hat.col(0));
      estimates.push_back(estimate_json("pca", std::nan(""), count, R, est.rank_warning, est.gap_warning, {}));
      clock.mark("pca");
    }
  }
  write_csv(out_path("factor_count.csv"), counts.table);

  // Pairwise correlations of the leading factors, plus their means.
  CsvTable corr;
  corr.header = {"factor"};
  for (const auto& [name, f] : first_factors) corr.header.push_back(name);
  corr.header.push_back("mean");
  for (const auto& [name, f] : first_factors) {
    std::vector<std::string> row{name};
    for (const auto& [other, g] : first_factors) row.push_back(format_double(&f == &g ? 1.0 : correlation(f, g)));
    row.push_back(format_double(f.mean()));
    corr.rows.push_back(std::move(row));
  }
  write_csv(out_path("factor_correlation.csv"), corr);
  clock.mark("write");

  json files = json::array();
  for (const auto& f : result.files) files.push_back(f.filename().string());
  json manifest = {{"tool", "cqfm"},
                   {"version", CQFM_VERSION},
                   {"command", "fit"},
                   {"config", config_json(config)},
                   {"methods", methods_json(methods)},
                   {"n", panel.num_units()},
                   {"T", panel.num_periods()},
                   {"D", panel.num_characteristics()},
                   {"k_n", design.basis.k_n()},
                   {"seed", config.seed},
                   {"estimates", estimates},
                   {"outputs", files},
                   {"timings_seconds", clock.timings()}};
  result.manifest = config.output_dir / "manifest.json";
  write_json(result.manifest, manifest);
  return result;
}

CommandResult cmd_select_rank(const RunConfig& config) {
  config.validate();
  const auto methods = config.resolved_methods({Method::QPPCA, Method::PPCA});
  StageClock clock;
  const PanelData panel = at_stage("load", [&] { return load_for(config); });
  clock.mark("load");
  const SieveDesign design = at_stage("basis", [&] { return build_design(panel, config.k_n); });
  clock.mark("basis");
  fs::create_directories(config.output_dir);

  FactorCountTable counts(panel.num_periods());
  json estimates = json::array();
  const auto qr = quantreg_options(config);
  for (Method m : methods) {
    if (m == Method::QPPCA) {
      for (double tau : config.taus) {
        const std::string label = tau_label(tau);
        const auto fit = at_stage(label + " quantile_regression",
                                  [&] { return fit_quantile_panel(panel.Y, design.Z, tau, qr); });
        const auto count = at_stage(label + " select_rank",
                                    [&] { return select_num_factors(fit, config.R_bar, config.d, config.exponent); });
        counts.add("qppca", format_double(tau), count, chosen_rank(config, count));
        estimates.push_back(estimate_json(label, tau, count, chosen_rank(config, count), false, false,
                                          fit.kkt_residuals));
        clock.mark(label);
      }
    } else {
      FactorCountResult count;
      if (m == Method::PPCA) {
        const auto fit = at_stage("ppca least_squares", [&] { return fit_least_squares_panel(panel.Y, design.Z); });
        count = at_stage("ppca select_rank",
                         [&] { return select_num_factors(fit, config.R_bar, config.d, config.exponent); });
      } else {
        count = at_stage("pca select_rank", [&] {
          return select_from_spectrum(panel_spectrum(panel.Y), panel.num_units(), panel.num_periods(), config.R_bar,
                                      config.d, config.exponent);
        });
      }
      counts.add(to_string(m), "mean", count, chosen_rank(config, count));
      estimates.push_back(estimate_json(to_string(m), std::nan(""), count, chosen_rank(config, count), false, false, {}));
      clock.mark(to_string(m));
    }
  }
  CommandResult result;
  result.files.push_back(config.output_dir / "factor_count.csv");
  write_csv(result.files.back(), counts.table);

  json manifest = {{"tool", "cqfm"},
                   {"version", CQFM_VERSION},
                   {"command", "select-rank"},
                   {"config", config_json(config)},
                   {"methods", methods_json(methods)},
                   {"n", panel.num_units()},
                   {"T", panel.num_periods()},
                   {"D", panel.num_characteristics()},
                   {"k_n", design.basis.k_n()},
                   {"estimates", estimates},
                   {"outputs", json::array({"factor_count.csv"})},
                   {"timings_seconds", clock.timings()}};
  result.manifest = config.output_dir / "manifest.json";
  write_json(result.manifest, manifest);
  return result;
}

CommandResult cmd_simulate(const RunConfig& config) {
  config.validate();
  MonteCarloConfig mc;
  mc.methods = config.resolved_methods({Method::QPPCA, Method::PPCA, Method::PCA});
  mc.spec = config.dgp;
  mc.spec.seed = config.seed;
  mc.spec.validate();
  mc.taus = config.taus;
  mc.n_reps = config.n_reps;
  mc.parallel = config.parallel;
  mc.threads = config.threads;
  mc.k_n = config.k_n;
  mc.R = config.R.value_or(0);
  mc.R_bar = config.R_bar;
  mc.d = config.d;
  mc.exponent = config.exponent;
  mc.grid_points = config.mc_grid_points;
  mc.quantreg = quantreg_options(config);

  StageClock clock;
  const auto report = run_monte_carlo(mc);
  clock.mark("monte_carlo");
  fs::create_directories(config.output_dir);

  CommandResult result;
  CsvTable reps;
  reps.header = {"rep",   "method",         "tau",         "R_true",     "R_used",        "trace_r2", "alignment_error",
                 "loading_rmse_mean", "loading_sup", "R_rank_min", "R_eigen_ratio", "ok",       "error"};
  for (const auto& r : report.records) {
    const double rmse = r.loading_rmse.size() > 0 ? r.loading_rmse.mean() : std::nan("");
    reps.rows.push_back({std::to_string(r.rep), to_string(r.method), format_double(r.tau), std::to_string(r.R_true),
                         std::to_string(r.R_used), format_double(r.trace_r2), format_double(r.alignment_error),
                         format_double(rmse), format_double(r.loading_sup), std::to_string(r.R_rank_min),
                         std::to_string(r.R_eigen_ratio), r.ok ? "1" : "0", r.error});
  }
  result.files.push_back(config.output_dir / "replications.csv");
  write_csv(result.files.back(), reps);

  json summaries = json::array();
  for (const auto& s : report.summaries)
    summaries.push_back({{"method", to_string(s.method)},
                         {"tau", s.tau},
                         {"n_ok", s.n_ok},
                         {"n_failed", s.n_failed},
                         {"trace_r2_mean", s.trace_r2_mean},
                         {"trace_r2_median", s.trace_r2_median},
                         {"alignment_error_mean", s.alignment_error_mean},
                         {"alignment_error_median", s.alignment_error_median},
                         {"loading_rmse_mean", s.loading_rmse_mean},
                         {"loading_sup_median", s.loading_sup_median},
                         {"rank_min_accuracy", s.rank_min_accuracy},
                         {"eigen_ratio_accuracy", s.eigen_ratio_accuracy},
                         {"rank_min_mode", s.rank_min_mode}});
  json aggregate = {{"spec", spec_json(mc.spec)},
                    {"methods", methods_json(mc.methods)},
                    {"taus", mc.taus},
                    {"n_reps", mc.n_reps},
                    {"k_n", mc.k_n},
                    {"R", mc.R},
                    {"R_bar", mc.R_bar},
                    {"d", mc.d},
                    {"exponent", mc.exponent},
                    {"failed_reps", report.failed_reps},
                    {"summaries", summaries}};
  result.files.push_back(config.output_dir / "aggregate.json");
  write_json(result.files.back(), aggregate);
  clock.mark("write");

  json manifest = {{"tool", "cqfm"},
                   {"version", CQFM_VERSION},
                   {"command", "simulate"},
                   {"config", config_json(config)},
                   {"spec", spec_json(mc.spec)},
                   {"outputs", json::array({"replications.csv", "aggregate.json"})},
                   {"timings_seconds", clock.timings()}};
  result.manifest = config.output_dir / "manifest.json";
  write_json(result.manifest, manifest);
  return result;
}

}  // namespace cqfm
