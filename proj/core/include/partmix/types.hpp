#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "partmix/errors.hpp"

namespace partmix {

/// Condition-number cap for SPD factorizations; beyond this we refuse to
/// solve rather than return garbage.
inline constexpr double kConditionCap = 1e12;

enum class ClassLabel : int { Class1 = 0, Class2 = 1 };

/// Missing labels are represented by nullopt.
using Label = std::optional<ClassLabel>;

inline ClassLabel other(ClassLabel c) {
  return c == ClassLabel::Class1 ? ClassLabel::Class2 : ClassLabel::Class1;
}

/// 1-based class number as used in CSV files and reports.
inline int class_number(ClassLabel c) { return static_cast<int>(c) + 1; }

struct CommonCovariance {
  Eigen::MatrixXd sigma;
};

struct PerClassCovariance {
  Eigen::MatrixXd sigma1;
  Eigen::MatrixXd sigma2;
};

using Covariance = std::variant<CommonCovariance, PerClassCovariance>;

/// Two-component Gaussian mixture. pi2 is always derived as 1 - pi1.
struct MixtureParams {
  double pi1 = 0.5;
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu2;
  Covariance covariance = CommonCovariance{};

  double pi2() const { return 1.0 - pi1; }
  double mixing(ClassLabel c) const { return c == ClassLabel::Class1 ? pi1 : pi2(); }
  Eigen::Index dim() const { return mu1.size(); }
  const Eigen::VectorXd& mean(ClassLabel c) const {
    return c == ClassLabel::Class1 ? mu1 : mu2;
  }

  bool has_common_covariance() const {
    return std::holds_alternative<CommonCovariance>(covariance);
  }
  /// Class covariance; resolves to the shared matrix for the common variant.
  const Eigen::MatrixXd& sigma(ClassLabel c) const;
  /// Shared covariance; throws UnsupportedModelError on the per-class variant.
  const Eigen::MatrixXd& common_sigma() const;

  /// Component-relabelled copy (1 <-> 2).
  MixtureParams swapped() const;

  /// Checks invariants: pi1 in (0,1), consistent dimensions, each covariance
  /// symmetric positive definite with condition estimate below the cap.
  void validate(double condition_cap = kConditionCap) const;
};

MixtureParams make_common(double pi1, Eigen::VectorXd mu1, Eigen::VectorXd mu2,
                          Eigen::MatrixXd sigma);
MixtureParams make_per_class(double pi1, Eigen::VectorXd mu1, Eigen::VectorXd mu2,
                             Eigen::MatrixXd sigma1, Eigen::MatrixXd sigma2);
/// p = 1 shortcut used throughout the asymptotics.
MixtureParams make_univariate(double pi1, double mu1, double mu2, double sigma2);

/// Coefficients of the linear allocation rule d(y) = beta0 + beta'y.
struct DiscriminantCoeffs {
  double beta0 = 0.0;
  Eigen::VectorXd beta;

  /// A zero direction vector cannot discriminate; permitted but flagged.
  bool degenerate() const { return beta.size() == 0 || beta.isZero(0.0); }
};

/// Feature rows with optional class labels. The missing-label indicator
/// m_j == 1 corresponds to labels[j] == nullopt.
struct PartialSample {
  Eigen::MatrixXd features;   // n x p
  std::vector<Label> labels;  // size n

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool is_missing(Eigen::Index j) const { return !labels[static_cast<std::size_t>(j)].has_value(); }

  Eigen::Index n_classified() const;
  Eigen::Index n_unclassified() const { return size() - n_classified(); }
  Eigen::Index n_in_class(ClassLabel c) const;

  /// Rows with observed labels, in original order.
  PartialSample classified_subsample() const;

  /// Requires finite features and one label slot per row.
  void validate() const;
};

/// Logistic coefficients of the entropy-based label-dropping model.
struct MissingnessParams {
  double xi0 = 0.0;
  double xi1 = 0.0;

  void validate() const;
};

/// Psi = (theta, xi); the two blocks share no storage.
struct FullParams {
  MixtureParams theta;
  MissingnessParams xi;

  void validate(double condition_cap = kConditionCap) const {
    theta.validate(condition_cap);
    xi.validate();
  }
};

}  // namespace partmix
