#ifndef CQFM_BASIS_HPP
#define CQFM_BASIS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cqfm {

/// Standardized characteristics: n units by D columns, every entry finite.
struct CharacteristicsMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Column-wise affine transform to zero mean and unit sample sd.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd apply_rows(const Eigen::Ref<const Eigen::MatrixXd>& X) const;
};

struct StandardizeResult {
  CharacteristicsMatrix matrix;
  Standardizer transform;
};

/// Standardizes each column with the n-1 denominator. Throws InvalidArgument
/// naming the offending column when a column is constant or non-finite.
StandardizeResult standardize_columns(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                      std::vector<std::string> column_names = {});

enum class BasisFamily { Chebyshev };

/// Additive sieve basis: one global intercept followed by k_n Chebyshev
/// polynomials T_1..T_{k_n} per characteristic, characteristic-major.
///
/// Each characteristic is mapped to [-1, 1] through the affine map fixed by
/// its fitted min/max; values outside the fitted range are clamped.
/// Instances are immutable once fitted and safe to share across threads.
class SieveBasis {
 public:
  /// Unfitted placeholder with no characteristics.
  SieveBasis() = default;
  SieveBasis(int k_n, Eigen::VectorXd lower, Eigen::VectorXd upper,
             BasisFamily family = BasisFamily::Chebyshev);

  int k_n() const { return k_n_; }
  int num_characteristics() const { return static_cast<int>(lower_.size()); }
  int dimension() const { return 1 + num_characteristics() * k_n_; }
  BasisFamily family() const { return family_; }
  bool include_intercept() const { return true; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  /// Affine map of characteristic d onto [-1, 1], clamped.
  double map_to_unit(int d, double x) const;

  Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Row-wise evaluation; returns the n x dimension() design matrix.
  Eigen::MatrixXd design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& X) const;

 private:
  void fill(const double* x, Eigen::Index stride, double* out, Eigen::Index out_stride) const;

  int k_n_ = 1;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  BasisFamily family_ = BasisFamily::Chebyshev;
};

SieveBasis fit_basis(const CharacteristicsMatrix& X, int k_n);

inline Eigen::VectorXd evaluate_basis(const SieveBasis& basis,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  return basis.evaluate(x);
}

/// max(2, round(n^{1/3})).
int default_basis_size(Eigen::Index n);

}  // namespace cqfm

#endif  // CQFM_BASIS_HPP
