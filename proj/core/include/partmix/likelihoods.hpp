#pragma once

#include <optional>
#include <vector>

#include "partmix/types.hpp"

// Every objective function the estimators maximize, as pure functions of
// parameters and a PartialSample. All values are natural-log scale.

namespace partmix {

struct ObjectiveValue {
  double value = 0.0;
  /// Per-row contributions, materialized only on request.
  std::optional<std::vector<double>> per_observation;
  /// Row index responsible for a -inf value (missingness model only).
  std::optional<Eigen::Index> flagged_row;
};

/// Sum over classified rows of log(pi_z phi_z); empty classified subset -> 0.
ObjectiveValue loglik_classified(const MixtureParams& theta, const PartialSample& sample,
                                 bool with_contributions = false);

/// Sum over unclassified rows of log(pi1 phi1 + pi2 phi2); stable log-sum-exp.
ObjectiveValue loglik_unclassified(const MixtureParams& theta, const PartialSample& sample,
                                   bool with_contributions = false);

/// loglik_classified + loglik_unclassified, summed from the two parts.
ObjectiveValue loglik_ignorable(const MixtureParams& theta, const PartialSample& sample,
                                bool with_contributions = false);

/// Bernoulli log-likelihood of the missing-label indicators under
/// q(y; Psi). A contribution of -inf (probability exactly 0/1 against the
/// observed indicator) flags the offending row and short-circuits.
ObjectiveValue loglik_missing(const FullParams& psi, const PartialSample& sample,
                              bool with_contributions = false);

/// loglik_ignorable(theta) + loglik_missing(Psi).
ObjectiveValue loglik_full(const FullParams& psi, const PartialSample& sample,
                           bool with_contributions = false);

/// alpha * loglik_classified + (1 - alpha) * loglik_unclassified, alpha in [0,1].
ObjectiveValue fsc_objective(const MixtureParams& theta, const PartialSample& sample,
                             double alpha, bool with_contributions = false);

}  // namespace partmix
