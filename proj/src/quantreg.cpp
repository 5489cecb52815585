#include "cqfm/quantreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cqfm/error.hpp"
#include "parallel.hpp"

namespace cqfm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void validate(const Eigen::Ref<const MatrixXd>& Z, Index y_size, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("quantile level must lie in (0,1)");
  if (Z.rows() != y_size) throw InvalidArgument("design rows do not match response length");
  if (Z.cols() < 1) throw InvalidArgument("design matrix has no columns");
  if (Z.cols() > Z.rows())
    throw RankDeficient("design has more columns (" + std::to_string(Z.cols()) + ") than rows (" +
                        std::to_string(Z.rows()) + ")");
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double f = 1e20;
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) f = std::min(f, -v(i) / dv(i));
  return f;
}

// Frisch-Newton primal-dual method with Mehrotra correction on the dual
// problem  max y'd  s.t.  Z'd = (1-tau) Z'1,  0 <= d <= 1.  Only used to
// locate a good starting vertex; optimality is certified afterwards.
VectorXd interior_point(const Eigen::Ref<const MatrixXd>& Z, const Eigen::Ref<const VectorXd>& y,
                        double tau, int max_iterations, int& iterations) {
  const Index n = Z.rows();
  const double step_damping = 0.9995;

  VectorXd x = VectorXd::Constant(n, 1.0 - tau);
  VectorXd s = VectorXd::Constant(n, tau);
  const VectorXd c = -y;
  const VectorXd b = Z.transpose() * x;

  VectorXd dual = Z.colPivHouseholderQr().solve(c);
  VectorXd r = c - Z * dual;
  for (Index i = 0; i < n; ++i)
    if (r(i) == 0.0) r(i) = 1e-3;
  VectorXd z = r.cwiseMax(0.0);
  VectorXd w = z - r;

  const double scale = 1.0 + y.cwiseAbs().sum();
  double gap = c.dot(x) - dual.dot(b) + w.sum();
  VectorXd best = dual;

  iterations = 0;
  while (gap > 1e-11 * scale && iterations < max_iterations) {
    ++iterations;
    const VectorXd q = (z.cwiseQuotient(x) + w.cwiseQuotient(s)).cwiseInverse();
    r = z - w;
    const MatrixXd zq = Z.array().colwise() * q.array().sqrt();
    const Eigen::LDLT<MatrixXd> normal(zq.transpose() * zq);
    VectorXd rhs = Z.transpose() * q.cwiseProduct(r);

    VectorXd dy = normal.solve(rhs);
    VectorXd dx = q.cwiseProduct(Z * dy - r);
    VectorXd ds = -dx;
    VectorXd dz = -z.cwiseProduct((dx.cwiseQuotient(x).array() + 1.0).matrix());
    VectorXd dw = -w.cwiseProduct((ds.cwiseQuotient(s).array() + 1.0).matrix());

    double fp = std::min(step_damping * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
    double fd = std::min(step_damping * std::min(max_step(w, dw), max_step(z, dz)), 1.0);

    if (std::min(fp, fd) < 1.0) {
      double mu = z.dot(x) + w.dot(s);
      const double g = (z + fd * dz).dot(x + fp * dx) + (w + fd * dw).dot(s + fp * ds);
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));

      const VectorXd dxdz = dx.cwiseProduct(dz);
      const VectorXd dsdw = ds.cwiseProduct(dw);
      const VectorXd xinv = x.cwiseInverse();
      const VectorXd sinv = s.cwiseInverse();
      const VectorXd xi = mu * (xinv - sinv);
      rhs += Z.transpose() * q.cwiseProduct(dxdz - dsdw - xi);
      dy = normal.solve(rhs);
      dx = q.cwiseProduct(Z * dy + xi - r - dxdz + dsdw);
      ds = -dx;
      dz = (mu * xinv.array() - z.array() - xinv.array() * z.array() * dx.array() - dxdz.array()).matrix();
      dw = (mu * sinv.array() - w.array() - sinv.array() * w.array() * ds.array() - dsdw.array()).matrix();

      fp = std::min(step_damping * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
      fd = std::min(step_damping * std::min(max_step(w, dw), max_step(z, dz)), 1.0);
    }

    const VectorXd next_dual = dual + fd * dy;
    if (!next_dual.allFinite() || !dx.allFinite()) break;
    x += fp * dx;
    s += fp * ds;
    dual = next_dual;
    w += fd * dw;
    z += fd * dz;
    best = dual;
    gap = c.dot(x) - dual.dot(b) + w.sum();
    if (!std::isfinite(gap)) break;
  }
  return -best;
}

// Picks p linearly independent rows, preferring the smallest residuals.
std::vector<Index> starting_basis(const Eigen::Ref<const MatrixXd>& Z, const VectorXd& residual) {
  const Index n = Z.rows();
  const Index p = Z.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(residual(a)) < std::abs(residual(b));
  });

  for (double threshold : {1e-3, 1e-8}) {
    std::vector<Index> basis;
    MatrixXd Q(p, p);
    for (Index i : order) {
      VectorXd v = Z.row(i).transpose();
      const double norm = v.norm();
      if (norm == 0.0) continue;
      const auto k = static_cast<Index>(basis.size());
      for (int pass = 0; pass < 2; ++pass)
        for (Index j = 0; j < k; ++j) v -= Q.col(j).dot(v) * Q.col(j);
      const double rest = v.norm();
      if (rest > threshold * norm) {
        Q.col(k) = v / rest;
        basis.push_back(i);
        if (static_cast<Index>(basis.size()) == p) return basis;
      }
    }
  }
  throw RankDeficient("could not find a nonsingular set of basis observations");
}

}  // namespace

double check_objective(const Eigen::Ref<const MatrixXd>& Z, const Eigen::Ref<const VectorXd>& y,
                       const Eigen::Ref<const VectorXd>& a, double tau) {
  const VectorXd r = y - Z * a;
  double total = 0.0;
  for (Index i = 0; i < r.size(); ++i) total += check_loss(r(i), tau);
  return total;
}

double kkt_violation(const Eigen::Ref<const MatrixXd>& Z, const Eigen::Ref<const VectorXd>& y,
                     const Eigen::Ref<const VectorXd>& a, double tau) {
  const VectorXd r = y - Z * a;
  const double zero = 1e-10 * (1.0 + y.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Index j = 0; j < Z.cols(); ++j) {
    double g = 0.0;
    double slack = 0.0;
    double scale = 1.0;
    for (Index i = 0; i < Z.rows(); ++i) {
      const double zij = Z(i, j);
      scale += std::abs(zij);
      if (std::abs(r(i)) <= zero)
        slack += std::abs(zij);
      else
        g += zij * (tau - (r(i) < 0.0 ? 1.0 : 0.0));
    }
    worst = std::max(worst, std::max(0.0, std::abs(g) - slack) / scale);
  }
  return worst;
}

void require_full_column_rank(const Eigen::Ref<const MatrixXd>& Z) {
  if (Z.cols() > Z.rows())
    throw RankDeficient("design has more columns than rows");
  const Eigen::JacobiSVD<MatrixXd> svd(Z);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(sv.size() - 1) > 1e-10 * sv(0)))
    throw RankDeficient("design matrix is numerically rank deficient");
}

QuantileFitResult fit_quantile(const Eigen::Ref<const MatrixXd>& Z, const Eigen::Ref<const VectorXd>& y,
                               double tau, const QuantRegOptions& options) {
  validate(Z, y.size(), tau);
  if (!Z.allFinite() || !y.allFinite()) throw InvalidArgument("non-finite value in quantile regression input");
  require_full_column_rank(Z);
  const Index n = Z.rows();
  const Index p = Z.cols();

  QuantileFitResult result;
  VectorXd warm;
  if (n == p) {
    warm = Z.fullPivLu().solve(y);
  } else {
    warm = interior_point(Z, y, tau, std::min(options.max_iterations, 100), result.interior_point_iterations);
  }
  std::vector<Index> basis = starting_basis(Z, y - Z * warm);

  const double zero = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
  const double tol_deriv = std::max(1e-13, 1e-3 * options.tol);
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  VectorXd beta(p);
  VectorXd r(n);
  VectorXd psi(n);

  struct Candidate {
    double step;
    double weight;
    Index obs;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(n));

  for (int iter = 0;; ++iter) {
    const MatrixXd Zh = Z(basis, Eigen::all);
    const Eigen::PartialPivLU<MatrixXd> lu(Zh);
    const VectorXd yh = y(basis);
    beta = lu.solve(yh);
    const MatrixXd inverse = lu.inverse();
    r = y - Z * beta;
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Index k : basis) {
      r(k) = 0.0;
      in_basis[static_cast<std::size_t>(k)] = 1;
    }

    double objective = 0.0;
    for (Index i = 0; i < n; ++i) {
      objective += check_loss(r(i), tau);
      psi(i) = (in_basis[static_cast<std::size_t>(i)] || std::abs(r(i)) <= zero)
                   ? 0.0
                   : tau - (r(i) < 0.0 ? 1.0 : 0.0);
    }
    result.objective_trace.push_back(objective);

    // Column j of M is Z d_j, the rate at which residuals move when the
    // fit leaves basis observation j.
    const MatrixXd M = Z * inverse;
    const VectorXd gd = inverse.transpose() * (Z.transpose() * psi);

    double best_deriv = 0.0;
    Index best_j = -1;
    double best_sign = 0.0;
    for (Index j = 0; j < p; ++j) {
      double deg_plus = 0.0;
      double deg_minus = 0.0;
      double scale = 1.0;
      for (Index i = 0; i < n; ++i) {
        const double m = M(i, j);
        scale += std::abs(m);
        if (in_basis[static_cast<std::size_t>(i)] || std::abs(r(i)) > zero) continue;
        deg_plus += std::max(-tau * m, (1.0 - tau) * m);
        deg_minus += std::max(tau * m, -(1.0 - tau) * m);
      }
      const double plus = -gd(j) + (1.0 - tau) + deg_plus;
      const double minus = gd(j) + tau + deg_minus;
      const double limit = -tol_deriv * scale;
      if (plus < limit && plus < best_deriv) {
        best_deriv = plus;
        best_j = j;
        best_sign = 1.0;
      }
      if (minus < limit && minus < best_deriv) {
        best_deriv = minus;
        best_j = j;
        best_sign = -1.0;
      }
    }

    if (best_j < 0) {
      result.a_hat = beta;
      result.objective = objective;
      result.iterations = iter;
      result.basis = basis;
      result.kkt_residual = kkt_violation(Z, y, beta, tau);
      return result;
    }
    if (iter >= options.max_iterations)
      throw NotConverged("quantile regression did not converge within " +
                             std::to_string(options.max_iterations) + " iterations",
                         kkt_violation(Z, y, beta, tau));

    // Exact line search along the edge: the objective is convex piecewise
    // linear in the step, so walk the breakpoints until the slope turns
    // nonnegative.
    candidates.clear();
    for (Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || std::abs(r(i)) <= zero) continue;
      const double ci = best_sign * M(i, best_j);
      if (ci == 0.0) continue;
      const double step = r(i) / ci;
      if (step > 0.0) candidates.push_back({step, std::abs(ci), i});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return a.step < b.step || (a.step == b.step && a.obs < b.obs);
    });
    double slope = best_deriv;
    Index entering = -1;
    for (const auto& cand : candidates) {
      slope += cand.weight;
      if (slope >= 0.0) {
        entering = cand.obs;
        break;
      }
    }
    if (entering < 0)
      throw NotConverged("quantile regression line search found no breakpoint",
                         kkt_violation(Z, y, beta, tau));
    basis[static_cast<std::size_t>(best_j)] = entering;
  }
}

SieveFit fit_quantile_panel(const Eigen::Ref<const MatrixXd>& Y, const Eigen::Ref<const MatrixXd>& Z,
                            double tau, const QuantRegOptions& options) {
  if (Y.rows() != Z.rows()) throw InvalidArgument("panel rows do not match design rows");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("quantile level must lie in (0,1)");
  require_full_column_rank(Z);
  const Index T = Y.cols();
  SieveFit fit;
  fit.tau = tau;
  fit.A_hat.resize(Z.cols(), T);
  fit.iterations.assign(static_cast<std::size_t>(T), 0);
  fit.kkt_residuals.assign(static_cast<std::size_t>(T), 0.0);

  detail::parallel_for(static_cast<std::size_t>(T), options.threads, [&](std::size_t t) {
    try {
      const auto res = fit_quantile(Z, Y.col(static_cast<Index>(t)), tau, options);
      fit.A_hat.col(static_cast<Index>(t)) = res.a_hat;
      fit.iterations[t] = res.iterations;
      fit.kkt_residuals[t] = res.kkt_residual;
    } catch (const Error& e) {
      throw StageError("period " + std::to_string(t + 1), e.what());
    }
  });
  fit.Y_hat = Z * fit.A_hat;
  return fit;
}

SieveFit fit_least_squares_panel(const Eigen::Ref<const MatrixXd>& Y, const Eigen::Ref<const MatrixXd>& Z) {
  if (Y.rows() != Z.rows()) throw InvalidArgument("panel rows do not match design rows");
  require_full_column_rank(Z);
  SieveFit fit;
  fit.tau = std::numeric_limits<double>::quiet_NaN();
  fit.A_hat = Z.colPivHouseholderQr().solve(Y);
  fit.Y_hat = Z * fit.A_hat;
  fit.iterations.assign(static_cast<std::size_t>(Y.cols()), 0);
  fit.kkt_residuals.assign(static_cast<std::size_t>(Y.cols()), 0.0);
  return fit;
}

}  // namespace cqfm
