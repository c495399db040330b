#include "partmix/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <utility>

#include "partmix/stats.hpp"

namespace partmix {

namespace {

// Cholesky solve for Sigma x = b with a condition estimate from the
// eigenvalue range. Shared by the discriminant and Mahalanobis paths.
Eigen::VectorXd spd_solve(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& b,
                          double condition_cap) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw DegenerateDataError("covariance not positive definite");
  if (hi / lo > condition_cap)
    throw IllConditionedError("covariance condition estimate above cap");
  return Eigen::LLT<Eigen::MatrixXd>(sigma).solve(b);
}

}  // namespace

GaussianLogDensity::GaussianLogDensity(Eigen::VectorXd mu, const Eigen::MatrixXd& sigma)
    : mu_(std::move(mu)), llt_(sigma) {
  if (llt_.info() != Eigen::Success)
    throw DegenerateDataError("covariance not positive definite");
  const double half_logdet =
      llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  log_norm_ = -0.5 * static_cast<double>(mu_.size()) * kLogTwoPi - half_logdet;
}

double GaussianLogDensity::operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const Eigen::VectorXd w = llt_.matrixL().solve(y - mu_);
  return log_norm_ - 0.5 * w.squaredNorm();
}

MixtureDensity::MixtureDensity(const MixtureParams& theta)
    : log_pi1_(std::log(theta.pi1)),
      log_pi2_(std::log(theta.pi2())),
      comp1_(theta.mu1, theta.sigma(ClassLabel::Class1)),
      comp2_(theta.mu2, theta.sigma(ClassLabel::Class2)) {}

double MixtureDensity::log_component(ClassLabel c,
                                     const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return c == ClassLabel::Class1 ? comp1_(y) : comp2_(y);
}

double MixtureDensity::log_joint(ClassLabel c,
                                 const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return c == ClassLabel::Class1 ? log_pi1_ + comp1_(y) : log_pi2_ + comp2_(y);
}

double MixtureDensity::log_mixture(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return log_sum_exp(log_pi1_ + comp1_(y), log_pi2_ + comp2_(y));
}

TauPair MixtureDensity::tau(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const double d = (log_pi2_ + comp2_(y)) - (log_pi1_ + comp1_(y));
  const double t1 = logistic(-d);
  return TauPair{t1, 1.0 - t1};
}

double MixtureDensity::entropy(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return partmix::entropy(tau(y));
}

ClassLabel MixtureDensity::allocate(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const TauPair t = tau(y);
  return t.tau1 >= t.tau2 ? ClassLabel::Class1 : ClassLabel::Class2;
}

DiscriminantCoeffs discriminant_from_theta(const MixtureParams& theta,
                                           double condition_cap) {
  theta.validate(condition_cap);
  const Eigen::MatrixXd& sigma = theta.common_sigma();
  const Eigen::VectorXd diff = theta.mu1 - theta.mu2;
  DiscriminantCoeffs rule;
  rule.beta = spd_solve(sigma, diff, condition_cap);
  rule.beta0 = -0.5 * (theta.mu1 + theta.mu2).dot(rule.beta) +
               std::log(theta.pi1 / theta.pi2());
  return rule;
}

TauPair posterior_tau(const Eigen::Ref<const Eigen::VectorXd>& y,
                      const MixtureParams& theta) {
  if (!y.allFinite()) throw InvalidInputError("posterior_tau: non-finite feature vector");
  if (y.size() != theta.dim())
    throw InvalidInputError("posterior_tau: feature length does not match the model");
  return MixtureDensity(theta).tau(y);
}

double entropy(double tau1, double tau2) {
  if (!(tau1 >= 0.0 && tau1 <= 1.0 && tau2 >= 0.0 && tau2 <= 1.0))
    throw InvalidInputError("entropy: components must lie in [0, 1]");
  if (std::abs(tau1 + tau2 - 1.0) > 1e-8)
    throw InvalidInputError("entropy: components must sum to one");
  auto term = [](double t) { return t > 0.0 ? -t * std::log(t) : 0.0; };
  return term(tau1) + term(tau2);
}

double missingness_prob(const Eigen::Ref<const Eigen::VectorXd>& y,
                        const FullParams& psi) {
  const double e = MixtureDensity(psi.theta).entropy(y);
  return logistic(psi.xi.xi0 + psi.xi.xi1 * e);
}

ClassLabel bayes_allocate(const Eigen::Ref<const Eigen::VectorXd>& y,
                          const DiscriminantCoeffs& rule) {
  if (y.size() != rule.beta.size())
    throw InvalidInputError("bayes_allocate: dimension mismatch");
  const double d = rule.beta0 + rule.beta.dot(y);
  return d >= 0.0 ? ClassLabel::Class1 : ClassLabel::Class2;
}

double error_rate(const DiscriminantCoeffs& rule, const MixtureParams& theta) {
  if (rule.degenerate())
    throw DegenerateDataError("error_rate: zero discriminant vector");
  const Eigen::MatrixXd& sigma = theta.common_sigma();
  if (rule.beta.size() != theta.dim())
    throw InvalidInputError("error_rate: dimension mismatch");
  const double s = std::sqrt(rule.beta.dot(sigma * rule.beta));
  const double d1 = rule.beta0 + rule.beta.dot(theta.mu1);
  const double d2 = rule.beta0 + rule.beta.dot(theta.mu2);
  return theta.pi1 * normal_cdf(-d1 / s) + theta.pi2() * normal_cdf(d2 / s);
}

double mahalanobis_delta(const MixtureParams& theta, double condition_cap) {
  theta.validate(condition_cap);
  const Eigen::MatrixXd& sigma = theta.common_sigma();
  const Eigen::VectorXd diff = theta.mu1 - theta.mu2;
  return std::sqrt(diff.dot(spd_solve(sigma, diff, condition_cap)));
}

}  // namespace partmix
