#include "cqfm/basis.hpp"

#include <algorithm>
#include <cmath>

#include "cqfm/error.hpp"

namespace cqfm {

Eigen::VectorXd Standardizer::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mean.size())
    throw InvalidArgument("standardize: expected " + std::to_string(mean.size()) +
                          " characteristics, got " + std::to_string(x.size()));
  return (x - mean).cwiseQuotient(sd);
}

Eigen::MatrixXd Standardizer::apply_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
  if (X.cols() != mean.size())
    throw InvalidArgument("standardize: expected " + std::to_string(mean.size()) +
                          " characteristics, got " + std::to_string(X.cols()));
  Eigen::MatrixXd out = X.rowwise() - mean.transpose();
  return out.array().rowwise() / sd.transpose().array();
}

StandardizeResult standardize_columns(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                      std::vector<std::string> column_names) {
  const Eigen::Index n = X.rows();
  const Eigen::Index D = X.cols();
  if (n < 2 || D < 1) throw InvalidArgument("standardize: need at least 2 rows and 1 column");
  if (column_names.empty()) {
    for (Eigen::Index d = 0; d < D; ++d) column_names.push_back("x" + std::to_string(d + 1));
  } else if (static_cast<Eigen::Index>(column_names.size()) != D) {
    throw InvalidArgument("standardize: column name count does not match column count");
  }

  StandardizeResult result;
  result.transform.mean.resize(D);
  result.transform.sd.resize(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    const auto col = X.col(d);
    if (!col.allFinite())
      throw InvalidArgument("standardize: non-finite value in characteristic '" + column_names[d] + "'");
    if (col.maxCoeff() == col.minCoeff())
      throw InvalidArgument("standardize: constant characteristic '" + column_names[d] + "'");
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
    result.transform.mean(d) = mean;
    result.transform.sd(d) = sd;
  }
  result.matrix.values = result.transform.apply_rows(X);
  result.matrix.column_names = std::move(column_names);
  return result;
}

SieveBasis::SieveBasis(int k_n, Eigen::VectorXd lower, Eigen::VectorXd upper, BasisFamily family)
    : k_n_(k_n), lower_(std::move(lower)), upper_(std::move(upper)), family_(family) {
  if (k_n_ < 1) throw InvalidArgument("fit_basis: k_n must be >= 1");
  if (lower_.size() < 1 || lower_.size() != upper_.size())
    throw InvalidArgument("fit_basis: inconsistent characteristic ranges");
  for (Eigen::Index d = 0; d < lower_.size(); ++d) {
    if (!(upper_(d) > lower_(d)))
      throw InvalidArgument("fit_basis: characteristic " + std::to_string(d + 1) + " has an empty range");
  }
}

double SieveBasis::map_to_unit(int d, double x) const {
  const double u = (2.0 * x - (lower_(d) + upper_(d))) / (upper_(d) - lower_(d));
  return std::clamp(u, -1.0, 1.0);
}

void SieveBasis::fill(const double* x, Eigen::Index stride, double* out, Eigen::Index out_stride) const {
  out[0] = 1.0;
  const int D = num_characteristics();
  for (int d = 0; d < D; ++d) {
    const double u = map_to_unit(d, x[d * stride]);
    double* dst = out + (1 + d * k_n_) * out_stride;
    // T_0 = 1, T_1 = u, T_{j+1} = 2u T_j - T_{j-1}
    double prev = 1.0;
    double cur = u;
    dst[0] = cur;
    for (int j = 1; j < k_n_; ++j) {
      const double next = 2.0 * u * cur - prev;
      prev = cur;
      cur = next;
      dst[j * out_stride] = cur;
    }
  }
}

Eigen::VectorXd SieveBasis::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != num_characteristics())
    throw InvalidArgument("evaluate_basis: expected " + std::to_string(num_characteristics()) +
                          " characteristics, got " + std::to_string(x.size()));
  Eigen::VectorXd out(dimension());
  fill(x.data(), x.innerStride(), out.data(), 1);
  return out;
}

Eigen::MatrixXd SieveBasis::design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
  if (X.cols() != num_characteristics())
    throw InvalidArgument("evaluate_basis: expected " + std::to_string(num_characteristics()) +
                          " characteristics, got " + std::to_string(X.cols()));
  Eigen::MatrixXd Z(X.rows(), dimension());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    fill(X.data() + i, X.outerStride(), Z.data() + i, Z.outerStride());
  return Z;
}

SieveBasis fit_basis(const CharacteristicsMatrix& X, int k_n) {
  if (k_n < 1) throw InvalidArgument("fit_basis: k_n must be >= 1");
  if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("fit_basis: empty characteristics matrix");
  if (!X.values.allFinite()) throw InvalidArgument("fit_basis: non-finite characteristic value");
  return SieveBasis(k_n, X.values.colwise().minCoeff().transpose(),
                    X.values.colwise().maxCoeff().transpose());
}

int default_basis_size(Eigen::Index n) {
  const auto k = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
  return std::max(2, k);
}

}  // namespace cqfm
