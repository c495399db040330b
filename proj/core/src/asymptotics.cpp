#include "partmix/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "partmix/detail/finite_diff.hpp"
#include "partmix/model.hpp"
#include "partmix/stats.hpp"

namespace partmix {

namespace {

constexpr double kFdStep = 1e-5;  // steps for J and H; err and beta are smooth

void require_univariate_common(const MixtureParams& theta) {
  if (theta.dim() != 1)
    throw UnsupportedModelError("information matrices support p = 1 only");
  if (!theta.has_common_covariance())
    throw UnsupportedModelError("information matrices require the common-covariance model");
  theta.validate();
}

// theta <-> (pi1, mu1, mu2, sigma2) coordinate bridge for the delta method.
Eigen::Vector4d theta_coords(const MixtureParams& theta) {
  return {theta.pi1, theta.mu1[0], theta.mu2[0], theta.common_sigma()(0, 0)};
}

MixtureParams theta_from_coords(const Eigen::Vector4d& x) {
  return make_univariate(x[0], x[1], x[2], x[3]);
}

Eigen::Vector2d beta_of_coords(const Eigen::VectorXd& x) {
  const DiscriminantCoeffs rule = discriminant_from_theta(theta_from_coords(x));
  return {rule.beta0, rule.beta[0]};
}

}  // namespace

HCoeffs h_coeffs(double delta) {
  if (!(delta > 0.0)) throw InvalidInputError("delta must be positive");
  const double pdf = normal_pdf(0.5 * delta);
  const double cdf = normal_cdf(-0.5 * delta);
  HCoeffs h;
  h.h1 = pdf * (4.0 * pdf + delta * (1.0 - 2.0 * cdf));
  h.h2 = pdf * pdf * (4.0 + delta * delta) / h.h1;
  return h;
}

void ExpansionInputs::validate() const {
  if (!(delta > 0.0)) throw InvalidInputError("delta must be positive");
  if (p < 1) throw InvalidInputError("p must be at least 1");
  if (n1c < 1 || n2c < 1) throw InvalidInputError("classified counts must be at least 1");
  if (k < 0) throw InvalidInputError("k must be nonnegative");
  if (p > 1 && n1c + n2c <= 2)
    throw InvalidInputError("p > 1 requires n1c + n2c > 2");
}

double a1_k(const ExpansionInputs& in) {
  in.validate();
  const HCoeffs h = h_coeffs(in.delta);
  const double h1_2k = std::pow(h.h1, 2 * in.k);
  const double h2_2k = std::pow(h.h2, 2 * in.k);
  const double nc = in.n1c + in.n2c;
  const double pm1 = in.p - 1;
  return h1_2k * in.delta / 4.0 +
         h2_2k * pm1 / in.delta * (1.0 / in.n1c + 1.0 / in.n2c) +
         h2_2k * pm1 * in.delta / (nc - 2.0);
}

double expected_error_cml(const ExpansionInputs& in) {
  in.validate();
  return normal_cdf(-0.5 * in.delta) + normal_pdf(0.5 * in.delta) / 4.0 * a1_k(in);
}

InfoMatrix fisher_info_classified(const MixtureParams& theta) {
  require_univariate_common(theta);
  const double pi1 = theta.pi1;
  const double s2 = theta.common_sigma()(0, 0);
  InfoMatrix info;
  info.parameter_order = {"pi1", "mu1", "mu2", "sigma2"};
  info.matrix = Eigen::Vector4d(1.0 / (pi1 * (1.0 - pi1)), pi1 / s2, (1.0 - pi1) / s2,
                                1.0 / (2.0 * s2 * s2))
                    .asDiagonal();
  return info;
}

Eigen::Vector4d mixture_score(double y, const MixtureParams& theta) {
  const double pi1 = theta.pi1;
  const double s2 = theta.common_sigma()(0, 0);
  const double m1 = theta.mu1[0];
  const double m2 = theta.mu2[0];
  const double sd = std::sqrt(s2);
  const double lp1 = -0.5 * (y - m1) * (y - m1) / s2 - std::log(sd) - 0.5 * kLogTwoPi;
  const double lp2 = -0.5 * (y - m2) * (y - m2) / s2 - std::log(sd) - 0.5 * kLogTwoPi;
  const double lmix = log_sum_exp(std::log(pi1) + lp1, std::log1p(-pi1) + lp2);
  const double tau1 = std::exp(std::log(pi1) + lp1 - lmix);
  const double tau2 = 1.0 - tau1;
  Eigen::Vector4d s;
  s[0] = std::exp(lp1 - lmix) - std::exp(lp2 - lmix);  // (phi1 - phi2)/f
  s[1] = tau1 * (y - m1) / s2;
  s[2] = tau2 * (y - m2) / s2;
  s[3] = tau1 * (-0.5 / s2 + (y - m1) * (y - m1) / (2.0 * s2 * s2)) +
         tau2 * (-0.5 / s2 + (y - m2) * (y - m2) / (2.0 * s2 * s2));
  return s;
}

Eigen::Vector4d classified_score(double y, ClassLabel z, const MixtureParams& theta) {
  const double pi1 = theta.pi1;
  const double s2 = theta.common_sigma()(0, 0);
  const bool one = z == ClassLabel::Class1;
  const double mu = one ? theta.mu1[0] : theta.mu2[0];
  Eigen::Vector4d s = Eigen::Vector4d::Zero();
  s[0] = one ? 1.0 / pi1 : -1.0 / (1.0 - pi1);
  s[one ? 1 : 2] = (y - mu) / s2;
  s[3] = -0.5 / s2 + (y - mu) * (y - mu) / (2.0 * s2 * s2);
  return s;
}

InfoMatrix fisher_info_mixture(const MixtureParams& theta, const QuadratureSpec& quad) {
  require_univariate_common(theta);
  if (quad.initial_nodes < 3 || quad.initial_nodes % 2 == 0)
    throw InvalidInputError("initial_nodes must be odd and at least 3");
  const double sd = std::sqrt(theta.common_sigma()(0, 0));
  const double lo = std::min(theta.mu1[0], theta.mu2[0]) - quad.padding * sd;
  const double hi = std::max(theta.mu1[0], theta.mu2[0]) + quad.padding * sd;
  const MixtureDensity density(theta);

  auto integrate = [&](Eigen::Index nodes) {
    const double step = (hi - lo) / static_cast<double>(nodes - 1);
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    for (Eigen::Index i = 0; i < nodes; ++i) {
      const double y = lo + step * static_cast<double>(i);
      const double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      const Eigen::Vector4d s = mixture_score(y, theta);
      const double f = std::exp(density.log_mixture(Eigen::VectorXd::Constant(1, y)));
      acc += (w * f) * (s * s.transpose());
    }
    return Eigen::Matrix4d((acc * step / 3.0).selfadjointView<Eigen::Lower>());
  };

  Eigen::Index nodes = quad.initial_nodes;
  Eigen::Matrix4d current = integrate(nodes);
  for (int r = 0; r < quad.max_refinements; ++r) {
    nodes = 2 * (nodes - 1) + 1;
    const Eigen::Matrix4d refined = integrate(nodes);
    // entries below 1e-9 of the matrix scale are rounding noise; measuring
    // their change against themselves would never settle
    const double scale = refined.cwiseAbs().maxCoeff();
    const double change =
        ((refined - current).cwiseAbs().array() /
         refined.cwiseAbs().array().max(1e-9 * scale))
            .maxCoeff();
    current = refined;
    if (change < 1e-6) {
      InfoMatrix info;
      info.parameter_order = {"pi1", "mu1", "mu2", "sigma2"};
      info.matrix = current;
      return info;
    }
  }
  throw QuadratureError("mixture information quadrature did not converge");
}

double excess_risk_firstorder(const InfoMatrix& info, const MixtureParams& theta,
                              double n) {
  require_univariate_common(theta);
  if (info.matrix.rows() != 4 || info.matrix.cols() != 4)
    throw InvalidInputError("information matrix must be 4x4 in (pi1, mu1, mu2, sigma2)");
  if (!(n > 0.0)) throw InvalidInputError("n must be positive");

  const Eigen::Vector4d x = theta_coords(theta);
  const Eigen::MatrixXd jac = detail::central_jacobian(beta_of_coords, x, kFdStep);

  const DiscriminantCoeffs bayes = discriminant_from_theta(theta);
  const Eigen::Vector2d beta_star(bayes.beta0, bayes.beta[0]);
  auto err_of_beta = [&theta](const Eigen::VectorXd& b) {
    DiscriminantCoeffs rule;
    rule.beta0 = b[0];
    rule.beta = Eigen::VectorXd::Constant(1, b[1]);
    return error_rate(rule, theta);
  };
  const Eigen::MatrixXd hess = detail::central_hessian(err_of_beta, beta_star, kFdStep);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(info.matrix);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionCap)
    throw IllConditionedError("information matrix numerically singular");

  const Eigen::MatrixXd cov = jac * info.matrix.ldlt().solve(jac.transpose());
  return (hess * cov).trace() / (2.0 * n);
}

double are_rule(const MixtureParams& theta, double gamma, const QuadratureSpec& quad) {
  require_univariate_common(theta);
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw InvalidInputError("gamma must lie in [0, 1]");
  const InfoMatrix info_cc = fisher_info_classified(theta);
  InfoMatrix info_pc = info_cc;
  if (gamma > 0.0) {
    const InfoMatrix info_mix = fisher_info_mixture(theta, quad);
    info_pc.matrix = (1.0 - gamma) * info_cc.matrix + gamma * info_mix.matrix;
  }
  // per-observation informations; the sample size cancels in the ratio
  return excess_risk_firstorder(info_cc, theta, 1.0) /
         excess_risk_firstorder(info_pc, theta, 1.0);
}

}  // namespace partmix
