#include "partmix/likelihoods.hpp"

#include <cmath>
#include <limits>

#include "partmix/model.hpp"
#include "partmix/stats.hpp"

namespace partmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fixed-order accumulation over selected rows; bit-reproducible for a given
// sample ordering.
template <typename Contribution>
ObjectiveValue accumulate(const PartialSample& sample, bool with_contributions,
                          Contribution contribution) {
  ObjectiveValue out;
  if (with_contributions)
    out.per_observation.emplace(static_cast<std::size_t>(sample.size()), 0.0);
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const double c = contribution(j);
    out.value += c;
    if (out.per_observation) (*out.per_observation)[static_cast<std::size_t>(j)] = c;
  }
  return out;
}

}  // namespace

ObjectiveValue loglik_classified(const MixtureParams& theta, const PartialSample& sample,
                                 bool with_contributions) {
  sample.validate();
  const MixtureDensity density(theta);
  return accumulate(sample, with_contributions, [&](Eigen::Index j) {
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (!label) return 0.0;
    return density.log_joint(*label, sample.features.row(j).transpose());
  });
}

ObjectiveValue loglik_unclassified(const MixtureParams& theta, const PartialSample& sample,
                                   bool with_contributions) {
  sample.validate();
  const MixtureDensity density(theta);
  return accumulate(sample, with_contributions, [&](Eigen::Index j) {
    if (!sample.is_missing(j)) return 0.0;
    return density.log_mixture(sample.features.row(j).transpose());
  });
}

ObjectiveValue loglik_ignorable(const MixtureParams& theta, const PartialSample& sample,
                                bool with_contributions) {
  ObjectiveValue classified = loglik_classified(theta, sample, with_contributions);
  const ObjectiveValue unclassified =
      loglik_unclassified(theta, sample, with_contributions);
  classified.value += unclassified.value;
  if (classified.per_observation) {
    for (std::size_t j = 0; j < classified.per_observation->size(); ++j)
      (*classified.per_observation)[j] += (*unclassified.per_observation)[j];
  }
  return classified;
}

ObjectiveValue loglik_missing(const FullParams& psi, const PartialSample& sample,
                              bool with_contributions) {
  sample.validate();
  psi.xi.validate();
  const MixtureDensity density(psi.theta);
  ObjectiveValue out;
  if (with_contributions)
    out.per_observation.emplace(static_cast<std::size_t>(sample.size()), 0.0);
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const double e = density.entropy(sample.features.row(j).transpose());
    const double x = psi.xi.xi0 + psi.xi.xi1 * e;
    // log q and log(1-q) straight from the linear predictor; finite x never
    // collapses to -inf through rounding.
    const double c = sample.is_missing(j) ? log_logistic(x) : log_logistic(-x);
    if (c == kNegInf) {
      out.value = kNegInf;
      out.flagged_row = j;
      return out;
    }
    out.value += c;
    if (out.per_observation) (*out.per_observation)[static_cast<std::size_t>(j)] = c;
  }
  return out;
}

ObjectiveValue loglik_full(const FullParams& psi, const PartialSample& sample,
                           bool with_contributions) {
  ObjectiveValue missing = loglik_missing(psi, sample, with_contributions);
  if (missing.flagged_row) return missing;
  const ObjectiveValue ignorable =
      loglik_ignorable(psi.theta, sample, with_contributions);
  missing.value += ignorable.value;
  if (missing.per_observation) {
    for (std::size_t j = 0; j < missing.per_observation->size(); ++j)
      (*missing.per_observation)[j] += (*ignorable.per_observation)[j];
  }
  return missing;
}

ObjectiveValue fsc_objective(const MixtureParams& theta, const PartialSample& sample,
                             double alpha, bool with_contributions) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidInputError("fsc_objective: alpha must lie in [0, 1]");
  ObjectiveValue classified = loglik_classified(theta, sample, with_contributions);
  const ObjectiveValue unclassified =
      loglik_unclassified(theta, sample, with_contributions);
  classified.value = alpha * classified.value + (1.0 - alpha) * unclassified.value;
  if (classified.per_observation) {
    for (std::size_t j = 0; j < classified.per_observation->size(); ++j)
      (*classified.per_observation)[j] =
          alpha * (*classified.per_observation)[j] +
          (1.0 - alpha) * (*unclassified.per_observation)[j];
  }
  return classified;
}

}  // namespace partmix
