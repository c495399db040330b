#include "partmix/types.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <utility>

namespace partmix {

namespace {

void check_spd(const Eigen::MatrixXd& sigma, Eigen::Index p, const char* name,
               double condition_cap) {
  if (sigma.rows() != p || sigma.cols() != p)
    throw InvalidInputError(std::string(name) + ": dimension mismatch with the means");
  if (!sigma.allFinite())
    throw InvalidInputError(std::string(name) + ": non-finite entries");
  const double scale = sigma.cwiseAbs().maxCoeff();
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    throw InvalidInputError(std::string(name) + ": not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0)
    throw DegenerateDataError(std::string(name) + ": not positive definite");
  if (hi / lo > condition_cap)
    throw IllConditionedError(std::string(name) + ": condition estimate above cap");
}

}  // namespace

const Eigen::MatrixXd& MixtureParams::sigma(ClassLabel c) const {
  if (const auto* common = std::get_if<CommonCovariance>(&covariance)) return common->sigma;
  const auto& pc = std::get<PerClassCovariance>(covariance);
  return c == ClassLabel::Class1 ? pc.sigma1 : pc.sigma2;
}

const Eigen::MatrixXd& MixtureParams::common_sigma() const {
  if (const auto* common = std::get_if<CommonCovariance>(&covariance)) return common->sigma;
  throw UnsupportedModelError("operation requires the common-covariance model");
}

MixtureParams MixtureParams::swapped() const {
  MixtureParams out = *this;
  out.pi1 = pi2();
  out.mu1 = mu2;
  out.mu2 = mu1;
  if (const auto* pc = std::get_if<PerClassCovariance>(&covariance))
    out.covariance = PerClassCovariance{pc->sigma2, pc->sigma1};
  return out;
}

void MixtureParams::validate(double condition_cap) const {
  if (!(pi1 > 0.0 && pi1 < 1.0))
    throw InvalidInputError("pi1 must lie strictly inside (0, 1)");
  const Eigen::Index p = mu1.size();
  if (p == 0 || mu2.size() != p)
    throw InvalidInputError("mu1 and mu2 must be nonempty and of equal length");
  if (!mu1.allFinite() || !mu2.allFinite())
    throw InvalidInputError("class means must be finite");
  if (const auto* common = std::get_if<CommonCovariance>(&covariance)) {
    check_spd(common->sigma, p, "sigma", condition_cap);
  } else {
    const auto& pc = std::get<PerClassCovariance>(covariance);
    check_spd(pc.sigma1, p, "sigma1", condition_cap);
    check_spd(pc.sigma2, p, "sigma2", condition_cap);
  }
}

MixtureParams make_common(double pi1, Eigen::VectorXd mu1, Eigen::VectorXd mu2,
                          Eigen::MatrixXd sigma) {
  MixtureParams theta;
  theta.pi1 = pi1;
  theta.mu1 = std::move(mu1);
  theta.mu2 = std::move(mu2);
  theta.covariance = CommonCovariance{std::move(sigma)};
  return theta;
}

MixtureParams make_per_class(double pi1, Eigen::VectorXd mu1, Eigen::VectorXd mu2,
                             Eigen::MatrixXd sigma1, Eigen::MatrixXd sigma2) {
  MixtureParams theta;
  theta.pi1 = pi1;
  theta.mu1 = std::move(mu1);
  theta.mu2 = std::move(mu2);
  theta.covariance = PerClassCovariance{std::move(sigma1), std::move(sigma2)};
  return theta;
}

MixtureParams make_univariate(double pi1, double mu1, double mu2, double sigma2) {
  return make_common(pi1, Eigen::VectorXd::Constant(1, mu1),
                     Eigen::VectorXd::Constant(1, mu2),
                     Eigen::MatrixXd::Constant(1, 1, sigma2));
}

Eigen::Index PartialSample::n_classified() const {
  Eigen::Index n = 0;
  for (const auto& l : labels) n += l.has_value();
  return n;
}

Eigen::Index PartialSample::n_in_class(ClassLabel c) const {
  Eigen::Index n = 0;
  for (const auto& l : labels) n += (l.has_value() && *l == c);
  return n;
}

PartialSample PartialSample::classified_subsample() const {
  PartialSample out;
  out.features.resize(n_classified(), dim());
  out.labels.reserve(static_cast<std::size_t>(out.features.rows()));
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < size(); ++j) {
    if (is_missing(j)) continue;
    out.features.row(r++) = features.row(j);
    out.labels.push_back(labels[static_cast<std::size_t>(j)]);
  }
  return out;
}

void PartialSample::validate() const {
  if (labels.size() != static_cast<std::size_t>(features.rows()))
    throw InvalidInputError("label count must equal the number of feature rows");
  if (!features.allFinite())
    throw InvalidInputError("feature rows must be finite");
}

void MissingnessParams::validate() const {
  if (!std::isfinite(xi0) || !std::isfinite(xi1))
    throw InvalidInputError("xi0 and xi1 must be finite");
}

}  // namespace partmix
