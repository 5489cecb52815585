#ifndef CQFM_PANEL_HPP
#define CQFM_PANEL_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cqfm {

/// Outcomes Y (n x T) and raw characteristics X (n x D) for the same units.
struct PanelData {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd X;
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_ids;
  std::vector<std::string> characteristic_names;

  Eigen::Index num_units() const { return Y.rows(); }
  Eigen::Index num_periods() const { return Y.cols(); }
  Eigen::Index num_characteristics() const { return X.cols(); }

  /// Fills in default labels where missing and checks shapes and finiteness.
  void validate();
};

}  // namespace cqfm

#endif  // CQFM_PANEL_HPP
