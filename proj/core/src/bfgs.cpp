#include "partmix/detail/bfgs.hpp"

#include <algorithm>

#include "partmix/detail/finite_diff.hpp"

namespace partmix::detail {

namespace {

Eigen::VectorXd masked_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double h,
                                const std::vector<int>& frozen) {
  Eigen::VectorXd g = central_gradient(f, x, h);
  for (int i : frozen) g[i] = 0.0;
  return g;
}

}  // namespace

BfgsResult bfgs_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                         Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.objective = f(res.x);
  res.trace.push_back(res.objective);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = masked_gradient(f, res.x, options.fd_step, options.frozen);
  bool model_was_reset = false;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (g.norm() <= options.grad_tol * (1.0 + std::abs(res.objective))) {
      res.converged = true;
      return res;
    }

    Eigen::VectorXd direction = hinv * g;  // ascent direction
    for (int i : options.frozen) direction[i] = 0.0;
    double slope = g.dot(direction);
    if (!(slope > 0.0) || !direction.allFinite()) {
      hinv.setIdentity();
      direction = g;
      slope = g.squaredNorm();
      if (slope == 0.0) {
        res.converged = true;
        return res;
      }
    }

    // Armijo backtracking on the ascent condition.
    double step = 1.0;
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      x_new = res.x + step * direction;
      f_new = f(x_new);
      if (std::isfinite(f_new) &&
          f_new >= res.objective + options.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!model_was_reset) {
        // retry from a fresh quadratic model before declaring failure
        model_was_reset = true;
        hinv.setIdentity();
        g = masked_gradient(f, res.x, options.fd_step, options.frozen);
        continue;
      }
      res.line_search_failed = true;
      return res;
    }
    model_was_reset = false;

    const Eigen::VectorXd g_new = masked_gradient(f, x_new, options.fd_step, options.frozen);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g - g_new;  // gradient of -f increases along s
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd v = eye - rho * s * y.transpose();
      hinv = v * hinv * v.transpose() + rho * s * s.transpose();
    }

    const double improvement = f_new - res.objective;
    res.x = x_new;
    res.objective = f_new;
    res.trace.push_back(f_new);
    g = g_new;

    if (improvement <= options.rel_tol * (1.0 + std::abs(res.objective)) &&
        g.norm() <= 10.0 * options.grad_tol * (1.0 + std::abs(res.objective))) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace partmix::detail
