#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace partmix::detail {

struct BfgsOptions {
  int max_iterations = 500;
  double rel_tol = 1e-10;        // relative objective change
  double grad_tol = 1e-6;        // |g| < grad_tol * (1 + |f|)
  double fd_step = 1e-6;         // central-difference step scale
  double armijo_c1 = 1e-4;
  int max_backtracks = 60;
  /// Coordinates excluded from the search (held at their initial value).
  std::vector<int> frozen;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // objective after every accepted step
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Maximizes f by BFGS with central finite-difference gradients and Armijo
/// backtracking. Non-finite objective values are treated as rejections by
/// the line search. On a failed line search the inverse-Hessian model is
/// reset once before giving up.
BfgsResult bfgs_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                         Eigen::VectorXd x0, const BfgsOptions& options);

}  // namespace partmix::detail
