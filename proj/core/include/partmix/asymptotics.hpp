#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "partmix/types.hpp"

// Closed-form expansion of the hard-EM expected error rate and the
// Fisher-information machinery behind the asymptotic relative efficiency
// of the estimated Bayes rule. The information matrices work in the
// univariate homoscedastic coordinates (pi1, mu1, mu2, sigma2), with every
// parameter treated as estimated.

namespace partmix {

struct HCoeffs {
  double h1 = 0.0;
  double h2 = 0.0;
};

/// h1 = phi(D/2) [4 phi(D/2) + D {1 - 2 Phi(-D/2)}],
/// h2 = phi(D/2)^2 (4 + D^2) / h1; both strictly inside (-1, 1) for D > 0.
HCoeffs h_coeffs(double delta);

struct ExpansionInputs {
  double delta = 1.0;  // Mahalanobis distance, > 0
  int p = 1;           // feature dimension
  int n1c = 1;         // classified counts per class
  int n2c = 1;
  int k = 0;           // iteration index

  void validate() const;
};

/// a1^(k) = h1^2k D/4 + h2^2k (p-1)/D (1/n1c + 1/n2c) + h2^2k (p-1) D/(nc-2).
double a1_k(const ExpansionInputs& inputs);

/// Phi(-D/2) + {phi(D/2)/4} a1^(k); decreasing in k toward the optimal rate.
double expected_error_cml(const ExpansionInputs& inputs);

struct InfoMatrix {
  Eigen::MatrixXd matrix;
  std::vector<std::string> parameter_order;  // {"pi1","mu1","mu2","sigma2"}
};

/// Per-observation information of a labeled draw (y, z):
/// diag(1/(pi1 pi2), pi1/s2, pi2/s2, 1/(2 s2^2)).
InfoMatrix fisher_info_classified(const MixtureParams& theta);

/// Score of the mixture log-density in (pi1, mu1, mu2, sigma2); p = 1.
Eigen::Vector4d mixture_score(double y, const MixtureParams& theta);

/// Score of the labeled-data log-likelihood for one observation; p = 1.
Eigen::Vector4d classified_score(double y, ClassLabel z, const MixtureParams& theta);

struct QuadratureSpec {
  double padding = 10.0;    // integration reaches padding * sd past the means
  int initial_nodes = 129;  // composite Simpson nodes (odd)
  int max_refinements = 16;
};

/// Expected score outer product of the mixture density by composite Simpson
/// quadrature, refined (node doubling) until every entry moves by less than
/// 1e-6 relative.
InfoMatrix fisher_info_mixture(const MixtureParams& theta,
                               const QuadratureSpec& quad = {});

/// First-order expected excess error rate (1/2n) tr(H J I^-1 J'), where
/// J = dbeta/dtheta and H is the Hessian of the error rate at the Bayes
/// rule, both by central finite differences.
double excess_risk_firstorder(const InfoMatrix& info, const MixtureParams& theta,
                              double n);

/// Excess-risk ratio of the completely classified rule to the partially
/// classified rule with a fraction gamma of labels missing completely at
/// random: info_PC = (1-gamma) info_CC + gamma info_mixture.
double are_rule(const MixtureParams& theta, double gamma,
                const QuadratureSpec& quad = {});

}  // namespace partmix
