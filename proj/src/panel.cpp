#include "cqfm/panel.hpp"

#include <cmath>
#include <set>

#include "cqfm/error.hpp"

namespace cqfm {

void PanelData::validate() {
  const Eigen::Index n = Y.rows();
  if (n < 1 || Y.cols() < 1) throw DataError("panel has no observations");
  if (X.rows() != n)
    throw DataError("characteristics have " + std::to_string(X.rows()) + " rows but outcomes have " +
                    std::to_string(n));
  if (X.cols() < 1) throw DataError("panel has no characteristics");
  if (unit_ids.empty())
    for (Eigen::Index i = 0; i < n; ++i) unit_ids.push_back("unit" + std::to_string(i + 1));
  if (time_ids.empty())
    for (Eigen::Index t = 0; t < Y.cols(); ++t) time_ids.push_back("t" + std::to_string(t + 1));
  if (characteristic_names.empty())
    for (Eigen::Index d = 0; d < X.cols(); ++d) characteristic_names.push_back("x" + std::to_string(d + 1));
  if (static_cast<Eigen::Index>(unit_ids.size()) != n) throw DataError("unit id count does not match rows");
  if (static_cast<Eigen::Index>(time_ids.size()) != Y.cols()) throw DataError("time id count does not match columns");
  if (static_cast<Eigen::Index>(characteristic_names.size()) != X.cols())
    throw DataError("characteristic name count does not match columns");
  if (std::set<std::string>(unit_ids.begin(), unit_ids.end()).size() != unit_ids.size())
    throw DataError("duplicate unit id");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < Y.cols(); ++t)
      if (!std::isfinite(Y(i, t)))
        throw DataError("missing or non-finite outcome for unit '" + unit_ids[i] + "'", i + 1, t + 1);
    for (Eigen::Index d = 0; d < X.cols(); ++d)
      if (!std::isfinite(X(i, d)))
        throw DataError("missing or non-finite characteristic for unit '" + unit_ids[i] + "'", i + 1, d + 1);
  }
}

}  // namespace cqfm
