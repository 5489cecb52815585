#include "cqfm/config.hpp"

#include <algorithm>

#include "cqfm/error.hpp"

namespace cqfm {

std::vector<Method> RunConfig::resolved_methods(const std::vector<Method>& defaults) const {
  if (methods.empty()) return defaults;
  std::vector<Method> out;
  for (const auto& name : methods) {
    const Method m = parse_method(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

void RunConfig::validate() const {
  if (taus.empty()) throw InvalidArgument("config: taus must not be empty");
  for (double tau : taus)
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("config: every tau must lie in (0,1)");
  if (k_n < 0) throw InvalidArgument("config: k_n must be >= 1 (or 0 for the default rule)");
  if (R && *R < 1) throw InvalidArgument("config: R must be >= 1");
  if (R_bar < 0) throw InvalidArgument("config: R_bar must be >= 1 (or 0 for the default rule)");
  if (!(d > 0.0)) throw InvalidArgument("config: d must be positive");
  if (!(exponent < 0.0)) throw InvalidArgument("config: threshold exponent must be negative");
  if (!(tol > 0.0)) throw InvalidArgument("config: tol must be positive");
  if (max_iterations < 1) throw InvalidArgument("config: max_iterations must be >= 1");
  if (grid_points < 2) throw InvalidArgument("config: grid_points must be >= 2");
  if (n_reps < 1) throw InvalidArgument("config: n_reps must be >= 1");
  if (mc_grid_points < 1) throw InvalidArgument("config: mc_grid_points must be >= 1");
  resolved_methods({});
}

std::string to_string(SelectionRule r) { return r == SelectionRule::RankMin ? "rank_min" : "eigen_ratio"; }

SelectionRule parse_selection_rule(const std::string& name) {
  if (name == "rank_min" || name == "rank-min") return SelectionRule::RankMin;
  if (name == "eigen_ratio" || name == "eigen-ratio") return SelectionRule::EigenRatio;
  throw InvalidArgument("unknown selection rule '" + name + "' (expected rank_min or eigen_ratio)");
}

}  // namespace cqfm
