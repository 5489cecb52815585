// Independent reference computations used by the unit and acceptance tests.
#ifndef CQFM_TEST_ORACLES_HPP
#define CQFM_TEST_ORACLES_HPP

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double check_sum(const MatrixXd& Z, const VectorXd& y, const VectorXd& a, double tau) {
  double s = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double u = y(i) - Z.row(i).dot(a);
    s += u > 0 ? tau * u : (tau - 1.0) * u;
  }
  return s;
}

// Minimum of the check loss over all basic solutions: every p-subset of
// rows with a nonsingular submatrix, solved by interpolation. The LP optimum
// is attained at one of them.
inline double brute_force_quantile(const MatrixXd& Z, const VectorXd& y, double tau, VectorXd* best = nullptr) {
  const Index n = Z.rows(), p = Z.cols();
  std::vector<Index> idx(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) idx[static_cast<std::size_t>(j)] = j;
  double best_obj = std::numeric_limits<double>::infinity();
  while (true) {
    MatrixXd A(p, p);
    VectorXd b(p);
    for (Index j = 0; j < p; ++j) {
      A.row(j) = Z.row(idx[static_cast<std::size_t>(j)]);
      b(j) = y(idx[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<MatrixXd> lu(A);
    if (lu.isInvertible()) {
      const VectorXd a = lu.solve(b);
      const double obj = check_sum(Z, y, a, tau);
      if (obj < best_obj) {
        best_obj = obj;
        if (best) *best = a;
      }
    }
    // next combination
    Index k = p - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - p + k) --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (Index j = k + 1; j < p; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best_obj;
}

// Chebyshev polynomials of the first kind by the closed form cos(k acos t).
inline double chebyshev(int k, double t) { return std::cos(k * std::acos(std::max(-1.0, std::min(1.0, t)))); }

// Largest principal angle style comparison: trace-R^2 computed with an
// explicit pseudo-inverse rather than a QR projection.
inline double trace_r2(const MatrixXd& F, const MatrixXd& Fh) {
  const MatrixXd P = Fh * (Fh.transpose() * Fh).inverse() * Fh.transpose();
  return (F.transpose() * P * F).trace() / (F.transpose() * F).trace();
}

inline double pearson(const VectorXd& a, const VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  double sab = 0, saa = 0, sbb = 0;
  for (Index i = 0; i < a.size(); ++i) {
    sab += (a(i) - ma) * (b(i) - mb);
    saa += (a(i) - ma) * (a(i) - ma);
    sbb += (b(i) - mb) * (b(i) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Random check-loss instance: intercept plus p-1 standard normal regressors.
struct Instance {
  MatrixXd Z;
  VectorXd y;
  double tau;
};

inline Instance random_instance(std::mt19937_64& rng, Index n, Index p, double tau) {
  std::normal_distribution<double> N;
  Instance inst{MatrixXd(n, p), VectorXd(n), tau};
  for (Index i = 0; i < n; ++i) {
    inst.Z(i, 0) = 1.0;
    for (Index j = 1; j < p; ++j) inst.Z(i, j) = N(rng);
    inst.y(i) = 0.5 * inst.Z.row(i).sum() + N(rng);
  }
  return inst;
}

}  // namespace oracle

#endif
