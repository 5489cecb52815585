#ifndef CQFM_COMMANDS_HPP
#define CQFM_COMMANDS_HPP

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cqfm/config.hpp"

namespace cqfm {

struct CommandResult {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> files;
};

/// Empirical pipeline on a returns/characteristics pair. Writes, under
/// config.output_dir:
///   factor_count.csv            eigenvalues, threshold and selected ranks per method and tau
///   factors_<label>.csv         F_hat and F_tilde per period
///   loadings_<label>.csv        loading functions on a grid per characteristic, others at 0
///   quantile_returns_<label>.csv  fitted conditional quantiles in the returns layout
///   factor_correlation.csv      correlations and means of the first factors
///   manifest.json
/// where <label> is e.g. "qppca_tau0.05" or "ppca".
CommandResult cmd_fit(const RunConfig& config);

/// First stage plus factor-count selection per tau; writes factor_count.csv
/// and manifest.json.
CommandResult cmd_select_rank(const RunConfig& config);

/// Monte Carlo study; writes replications.csv, aggregate.json and
/// manifest.json. aggregate.json depends only on the configuration.
CommandResult cmd_simulate(const RunConfig& config);

/// Command-line entry point. Errors are reported on `err` as a single JSON
/// object and yield a nonzero return value.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cqfm

#endif  // CQFM_COMMANDS_HPP
