#ifndef CQFM_CONFIG_HPP
#define CQFM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cqfm/baselines.hpp"
#include "cqfm/simulate.hpp"

namespace cqfm {

enum class SelectionRule { RankMin, EigenRatio };

/// Settings shared by the fit, select-rank and simulate commands. Every
/// field has a usable default.
struct RunConfig {
  std::vector<double> taus{0.05, 0.25, 0.5, 0.75, 0.95};
  int k_n = 0;               ///< 0: max(2, round(n^{1/3}))
  std::optional<int> R;      ///< unset: chosen by `rule`
  int R_bar = 0;             ///< 0: min(8, T - 1)
  double d = 0.25;
  double exponent = -0.25;
  SelectionRule rule = SelectionRule::RankMin;
  double tol = 1e-8;
  int max_iterations = 500;
  std::uint64_t seed = 20240101;
  /// Empty: the command's default method list.
  std::vector<std::string> methods;
  std::filesystem::path output_dir = "cqfm_out";
  bool demean = false;
  unsigned threads = 0;
  int grid_points = 101;

  std::filesystem::path returns_csv;
  std::filesystem::path characteristics_csv;

  DgpSpec dgp;
  int n_reps = 100;
  bool parallel = false;
  int mc_grid_points = 21;

  /// Parsed method list, falling back to `defaults`. Throws InvalidArgument
  /// for unknown names.
  std::vector<Method> resolved_methods(const std::vector<Method>& defaults) const;
  /// Throws InvalidArgument describing the first bad field.
  void validate() const;
};

std::string to_string(SelectionRule r);
SelectionRule parse_selection_rule(const std::string& name);

}  // namespace cqfm

#endif  // CQFM_CONFIG_HPP
