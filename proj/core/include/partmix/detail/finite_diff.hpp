#pragma once

#include <Eigen/Core>

namespace partmix::detail {

/// Central-difference gradient with per-coordinate step h*(1+|x_i|).
template <typename F>
Eigen::VectorXd central_gradient(F&& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + hi;
    xm[i] = x[i] - hi;
    g[i] = (f(xp) - f(xm)) / (2.0 * hi);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

/// Central-difference Jacobian of a vector-valued map.
template <typename F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd xp = x, xm = x;
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + hi;
    xm[i] = x[i] - hi;
    const Eigen::VectorXd column = (f(xp) - f(xm)) / (2.0 * hi);
    if (jac.size() == 0) jac.resize(column.size(), x.size());
    jac.col(i) = column;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return jac;
}

/// Symmetrized central-difference Hessian (four-point stencil per entry).
template <typename F>
Eigen::MatrixXd central_hessian(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd z = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = h * (1.0 + std::abs(x[i]));
    for (Eigen::Index j = i; j < n; ++j) {
      const double hj = h * (1.0 + std::abs(x[j]));
      z = x;
      z[i] += hi; z[j] += hj; const double fpp = f(z);
      z = x;
      z[i] += hi; z[j] -= hj; const double fpm = f(z);
      z = x;
      z[i] -= hi; z[j] += hj; const double fmp = f(z);
      z = x;
      z[i] -= hi; z[j] -= hj; const double fmm = f(z);
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
    }
  }
  return hess;
}

}  // namespace partmix::detail
