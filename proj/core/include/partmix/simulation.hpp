#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "partmix/asymptotics.hpp"
#include "partmix/estimation.hpp"
#include "partmix/rng.hpp"
#include "partmix/types.hpp"

// Synthetic-data generation under configurable label-missingness mechanisms,
// empirical rule evaluation, and the replication experiments. All randomness
// flows from streams derived as (master_seed, replication_index, purpose), so
// aggregate results do not depend on execution order or thread count.

namespace partmix {

struct Mcar {
  double gamma = 0.0;  // each label deleted independently with this rate
};
struct FixedCounts {
  int n1c = 1;  // labels kept per class, chosen uniformly; the rest deleted
  int n2c = 1;
};
struct EntropyLogistic {
  FullParams psi;  // carries the generative theta and xi
};
using MissingnessMechanism = std::variant<Mcar, FixedCounts, EntropyLogistic>;

/// n i.i.d. draws from the mixture; every label present. Per observation the
/// stream is consumed as one Bernoulli(pi1) then p standard normals.
PartialSample sample_mixture(const MixtureParams& theta, Eigen::Index n, RngStream& rng);

/// Hides labels according to the mechanism; features are never modified.
PartialSample apply_missingness(const PartialSample& sample,
                                const MissingnessMechanism& mechanism, RngStream& rng);

/// Pair-counting adjusted Rand index over two labelings of the same points.
/// Two single-cluster labelings (degenerate table) return 1 by convention.
double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b);

struct RuleEvaluation {
  double ari = 0.0;
  double error = 0.0;  // misallocation fraction after label-switch resolution
};

/// Posterior allocation under the fitted model (quadratic boundary when the
/// covariances differ), scored against the test labels.
RuleEvaluation evaluate_rule(const MixtureParams& fitted, const PartialSample& test);
/// Linear-rule variant.
RuleEvaluation evaluate_rule(const DiscriminantCoeffs& rule, const PartialSample& test);

struct ExperimentConfig {
  MixtureParams theta_true;
  MissingnessMechanism mechanism;
  Eigen::Index n = 500;
  Eigen::Index n_test = 2000;
  int replications = 100;
  std::vector<double> alpha_grid;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;  // subset of {"fsc", "full"}
  FitOptions fit;
  int threads = 0;  // 0 = machine parallelism

  void validate() const;
};

struct Eq2Row {
  int k = 0;
  double mean_error = 0.0;
  double se_error = 0.0;
  double analytic = 0.0;  // expected_error_cml at the same k
};

struct Eq2Result {
  std::vector<Eq2Row> rows;                 // k = 0 .. k_max
  Eigen::MatrixXd per_replication_errors;   // replications x (k_max + 1)
};

/// Replicated hard-EM experiment: per replication draws a sample, hides all
/// but the FixedCounts labels, runs fit_cml, and records the true error rate
/// of the discriminant after every iteration (held constant past the
/// assignment fixed point).
Eq2Result run_eq2_experiment(const ExperimentConfig& config, int k_max);

struct ReplicationRecord {
  int replication = 0;
  std::string method;
  std::optional<double> alpha;
  double ari = 0.0;
  double error = 0.0;
  bool ok = false;
  std::string failure;  // diagnostic when ok == false
};

struct AggregateRow {
  std::string method;
  std::optional<double> alpha;
  double mean_ari = 0.0;
  double se_ari = 0.0;
  double mean_error = 0.0;
  double se_error = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct ReplicationReport {
  std::vector<ReplicationRecord> records;
  std::vector<AggregateRow> aggregates;
  int failures = 0;
};

/// The fractionally-supervised-vs-full-likelihood experiment: per
/// replication fits the FSC estimator over the alpha grid and the full
/// estimator, resolves label switching against the classified rows, and
/// scores ARI and error on a fresh test sample. Per-fit failures are
/// excluded-and-counted; more than 10% failing aborts.
ReplicationReport run_figure1_experiment(const ExperimentConfig& config);

struct AreGrid {
  std::vector<double> pi1_values;
  std::vector<double> delta_values;
  double gamma = 1.0;
  Eigen::MatrixXd values;  // pi1 rows x delta columns
};

AreGrid run_table1_grid(const std::vector<double>& pi1_values,
                        const std::vector<double>& delta_values, double gamma,
                        const QuadratureSpec& quad = {});

}  // namespace partmix
