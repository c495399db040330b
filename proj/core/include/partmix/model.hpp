#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "partmix/types.hpp"

// Generative-model primitives: Bayes rule coefficients, posterior class
// probabilities, entropy, the entropy-logistic missingness probability,
// allocation, and the closed-form error rate under the homoscedastic model.

namespace partmix {

struct TauPair {
  double tau1 = 0.5;
  double tau2 = 0.5;
};

/// Cached multivariate normal log-density: factorizes once, evaluates many.
class GaussianLogDensity {
 public:
  GaussianLogDensity() = default;
  GaussianLogDensity(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma);

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  const Eigen::VectorXd& mean() const { return mu_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::VectorXd mu_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_ = 0.0;  // -(p/2) log(2 pi) - (1/2) log det Sigma
};

/// Per-theta evaluator caching both component factorizations.
class MixtureDensity {
 public:
  explicit MixtureDensity(const MixtureParams& theta);

  double log_component(ClassLabel c, const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// log(pi_c phi_c(y)).
  double log_joint(ClassLabel c, const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// log of the mixture density, stable log-sum-exp.
  double log_mixture(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  TauPair tau(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  double entropy(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  /// Posterior allocation, tau1 >= tau2 to Class1.
  ClassLabel allocate(const Eigen::Ref<const Eigen::VectorXd>& y) const;

 private:
  double log_pi1_, log_pi2_;
  GaussianLogDensity comp1_, comp2_;
};

/// Bayes rule coefficients beta = Sigma^{-1}(mu1 - mu2) and the matching
/// intercept, solved through the Cholesky factor.
DiscriminantCoeffs discriminant_from_theta(const MixtureParams& theta,
                                           double condition_cap = kConditionCap);

/// Posterior class probabilities tau_i(y; theta); log-density differencing.
TauPair posterior_tau(const Eigen::Ref<const Eigen::VectorXd>& y,
                      const MixtureParams& theta);

/// Shannon entropy -sum tau_i log tau_i, natural log, 0 log 0 == 0.
double entropy(double tau1, double tau2);
inline double entropy(TauPair t) { return entropy(t.tau1, t.tau2); }

/// q(y; Psi) = logistic(xi0 + xi1 * entropy(y)).
double missingness_prob(const Eigen::Ref<const Eigen::VectorXd>& y,
                        const FullParams& psi);

/// Class1 iff d(y) >= 0 (ties allocate to Class1).
ClassLabel bayes_allocate(const Eigen::Ref<const Eigen::VectorXd>& y,
                          const DiscriminantCoeffs& rule);

/// Closed-form error rate of the linear rule under the homoscedastic model:
///   pi1 Phi(-(b0 + b'mu1)/s) + pi2 Phi((b0 + b'mu2)/s),  s = sqrt(b'Sigma b).
double error_rate(const DiscriminantCoeffs& rule, const MixtureParams& theta);

/// Mahalanobis distance between the class-conditional distributions.
double mahalanobis_delta(const MixtureParams& theta,
                         double condition_cap = kConditionCap);

}  // namespace partmix
