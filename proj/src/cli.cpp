#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cqfm/commands.hpp"
#include "cqfm/error.hpp"

namespace cqfm {

namespace {

struct CliState {
  RunConfig config;
  std::string rule = "rank-min";
  std::string error_dist = "normal";
  std::string factor_process = "iid";
  std::vector<std::string> loadings;
  int R = 0;
};

void add_common(CLI::App& cmd, CliState& s) {
  RunConfig& c = s.config;
  cmd.add_option("--tau", c.taus, "quantile levels, comma separated")->delimiter(',');
  cmd.add_option("--k-n", c.k_n, "sieve terms per characteristic (0: default rule)");
  cmd.add_option("-R,--num-factors", s.R, "number of factors (0: estimated)");
  cmd.add_option("--R-bar", c.R_bar, "largest candidate factor count (0: min(8, T-1))");
  cmd.add_option("--d", c.d, "threshold constant");
  cmd.add_option("--exponent", c.exponent, "threshold exponent on n");
  cmd.add_option("--rule", s.rule, "rank-min or eigen-ratio");
  cmd.add_option("--tol", c.tol, "quantile regression optimality tolerance");
  cmd.add_option("--max-iterations", c.max_iterations, "quantile regression pivot limit");
  cmd.add_option("--seed", c.seed, "random seed");
  cmd.add_option("--methods", c.methods, "qppca, ppca, pca; comma separated")->delimiter(',');
  cmd.add_option("-o,--output-dir", c.output_dir, "output directory");
  cmd.add_option("--threads", c.threads, "worker threads (0: hardware)");
}

void add_data(CLI::App& cmd, CliState& s) {
  RunConfig& c = s.config;
  cmd.add_option("--returns", c.returns_csv, "returns CSV (unit_id, time columns)")->required();
  cmd.add_option("--characteristics", c.characteristics_csv, "characteristics CSV (unit_id, one column each)")
      ->required();
  cmd.add_flag("--demean", c.demean, "demean the panel before PCA");
}

// Plain key=value lines in a config file apply to whichever subcommand ran.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto subs = app_->get_subcommands();
    if (!subs.empty())
      for (auto& item : items)
        if (item.parents.empty()) item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* app_;
};

void finish(CliState& s) {
  if (s.R > 0) s.config.R = s.R;
  s.config.rule = parse_selection_rule(s.rule);
  s.config.dgp.error_dist = parse_error_distribution(s.error_dist);
  s.config.dgp.factor_process = parse_factor_process(s.factor_process);
  s.config.dgp.loading_functions = s.loadings;
}

void report(std::ostream& err, const Error& e) {
  nlohmann::ordered_json j = {{"kind", e.kind()}, {"message", e.what()}};
  if (auto* st = dynamic_cast<const StageError*>(&e)) j["stage"] = st->stage();
  if (auto* de = dynamic_cast<const DataError*>(&e)) {
    j["row"] = de->row();
    j["col"] = de->col();
  }
  if (auto* nc = dynamic_cast<const NotConverged*>(&e)) j["kkt_residual"] = nc->kkt_residual();
  err << nlohmann::ordered_json{{"error", j}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Characteristics-based quantile factor models"};
  app.set_version_flag("--version", std::string(CQFM_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));

  CliState fit_s, rank_s, sim_s;
  auto* fit = app.add_subcommand("fit", "estimate factors and loading functions on a panel");
  add_common(*fit, fit_s);
  add_data(*fit, fit_s);
  fit->add_option("--grid-points", fit_s.config.grid_points, "loading grid size per characteristic");

  auto* rank = app.add_subcommand("select-rank", "estimate the number of factors per quantile");
  add_common(*rank, rank_s);
  add_data(*rank, rank_s);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study on simulated panels");
  add_common(*sim, sim_s);
  DgpSpec& g = sim_s.config.dgp;
  sim->add_option("--n", g.n, "units");
  sim->add_option("--T", g.T, "periods");
  sim->add_option("--D", g.D, "characteristics");
  sim->add_option("--R-loc", g.R_loc, "location factors");
  sim->add_flag("--scale-factor,!--no-scale-factor", g.include_scale_factor, "add the multiplicative scale factor");
  sim->add_option("--loadings", sim_s.loadings, "loading function ids, e.g. linear:1,centered_square:2")
      ->delimiter(',');
  sim->add_option("--errors", sim_s.error_dist, "normal, t3 or cauchy");
  sim->add_option("--factor-process", sim_s.factor_process, "iid or ar1");
  sim->add_option("--noise-scale", g.noise_scale, "idiosyncratic scale");
  sim->add_option("--reps", sim_s.config.n_reps, "replications");
  sim->add_flag("--parallel", sim_s.config.parallel, "run replications in parallel");
  sim->add_option("--grid-points", sim_s.config.mc_grid_points, "loading grid size per characteristic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << nlohmann::ordered_json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  try {
    CommandResult result;
    if (fit->parsed()) {
      finish(fit_s);
      result = cmd_fit(fit_s.config);
    } else if (rank->parsed()) {
      finish(rank_s);
      result = cmd_select_rank(rank_s.config);
    } else {
      finish(sim_s);
      result = cmd_simulate(sim_s.config);
    }
    out << result.manifest.string() << '\n';
    return 0;
  } catch (const Error& e) {
    report(err, e);
    return 1;
  } catch (const std::exception& e) {
    err << nlohmann::ordered_json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
}

}  // namespace cqfm
