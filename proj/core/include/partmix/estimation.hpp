#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "partmix/types.hpp"

// Parameter estimation: supervised closed form, soft EM on the ignorable
// likelihood, the hard-EM classification-ML iteration, full-likelihood
// quasi-Newton ascent over Psi, and the fractionally supervised objective.

namespace partmix {

struct InitFromClassified {};
struct InitRandom {
  int restarts = 5;
};
struct InitProvided {
  MixtureParams theta0;
};
using InitStrategy = std::variant<InitFromClassified, InitRandom, InitProvided>;

struct FitOptions {
  int max_iterations = 1000;
  double rel_tol = 1e-8;
  double variance_floor_factor = 1e-6;
  std::uint64_t seed = 0;
  InitStrategy init = InitFromClassified{};
  /// Known mixing proportion; the M-step leaves it untouched when set.
  std::optional<double> fixed_pi1;
  /// Pins xi1 in full-likelihood fits (0 recovers the ignorable model).
  std::optional<double> fixed_xi1;

  void validate() const;
};

struct FitResult {
  MixtureParams theta;
  /// Present for full-likelihood fits only.
  std::optional<MissingnessParams> xi;
  /// Objective at initialization followed by the value after every update.
  /// Nondecreasing for the EM-based fits (slack 1e-10 relative).
  std::vector<double> objective_trace;
  /// Discriminant coefficients per iteration; homoscedastic EM fits only.
  std::vector<DiscriminantCoeffs> beta_trace;
  bool converged = false;
  int iterations = 0;
  /// True when any fitted covariance was clamped at the variance floor.
  bool at_variance_floor = false;
  int restarts_used = 0;

  double final_objective() const { return objective_trace.back(); }
};

/// Optimizer gave up; carries the best iterate seen.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, FitResult best)
      : Error(what), best_(std::move(best)) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

/// Closed-form ML on a completely classified sample. Pooled within-class
/// scatter over n when homoscedastic, per-class scatter over n_ic otherwise
/// (ML divisors, not n-2 / n_ic-1).
FitResult fit_supervised(const PartialSample& sample, bool homoscedastic);

/// Soft EM on log L_C + log L_UC.
FitResult fit_em_ignorable(const PartialSample& sample, const FitOptions& options,
                           bool homoscedastic);

/// Hard-EM classification ML under the common-covariance model: unlabeled
/// rows are assigned outright to the component with larger posterior (ties
/// to Class1) each E-step. Initializes from the classified subsample and
/// records the discriminant after every iteration (index 0 = initializer).
/// Stops at the assignment fixed point or after k_max iterations.
FitResult fit_cml(const PartialSample& sample, const FitOptions& options, int k_max);

/// Quasi-Newton ascent of the full likelihood over Psi = (theta, xi) in
/// unconstrained coordinates, initialized at the ignorable-EM estimate with
/// xi0 = logit(n_u/n), xi1 = 0.
FitResult fit_full(const PartialSample& sample, const FitOptions& options,
                   bool homoscedastic);

/// Weighted EM on alpha log L_C + (1 - alpha) log L_UC.
FitResult fit_fsc(const PartialSample& sample, double alpha, const FitOptions& options,
                  bool homoscedastic);

/// Picks the component permutation of the estimate that best agrees with the
/// reference: labeled-row assignment agreement for a sample reference,
/// mean-distance matching for a ground-truth reference. Ties keep the
/// estimate as is.
MixtureParams resolve_label_switching(const MixtureParams& estimate,
                                      const PartialSample& reference);
MixtureParams resolve_label_switching(const MixtureParams& estimate,
                                      const MixtureParams& reference);

// Unconstrained reparameterization used by the full-likelihood fit and the
// finite-difference checks. Layout: [logit pi1, mu1 (p), mu2 (p), then each
// covariance as its lower Cholesky factor, column-major, diagonal stored as
// log]. The common variant carries one factor block, the per-class variant
// two. pack_full appends [xi0, xi1].
Eigen::Index packed_theta_size(Eigen::Index p, bool homoscedastic);
Eigen::VectorXd pack_theta(const MixtureParams& theta);
MixtureParams unpack_theta(const Eigen::VectorXd& x, Eigen::Index p, bool homoscedastic);
Eigen::VectorXd pack_full(const FullParams& psi);
FullParams unpack_full(const Eigen::VectorXd& x, Eigen::Index p, bool homoscedastic);

}  // namespace partmix
