#include "partmix/simulation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <utility>

#include "partmix/likelihoods.hpp"
#include "partmix/model.hpp"
#include "partmix/stats.hpp"

namespace partmix {

namespace {

// Runs body(0..count-1) on up to `threads` workers. The first exception to
// escape a body is rethrown after all workers join.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  const double n = static_cast<double>(values.size());
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

std::vector<int> labels_as_ints(const PartialSample& sample) {
  std::vector<int> out(static_cast<std::size_t>(sample.size()));
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (!label) throw InvalidInputError("labeling contains missing entries");
    out[static_cast<std::size_t>(j)] = class_number(*label);
  }
  return out;
}

RuleEvaluation score_predictions(const std::vector<int>& predicted,
                                 const PartialSample& test) {
  const std::vector<int> truth = labels_as_ints(test);
  RuleEvaluation eval;
  eval.ari = adjusted_rand_index(predicted, truth);
  double mismatches = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) mismatches += predicted[j] != truth[j];
  const double direct = mismatches / static_cast<double>(truth.size());
  eval.error = std::min(direct, 1.0 - direct);  // best of the two label permutations
  return eval;
}

}  // namespace

PartialSample sample_mixture(const MixtureParams& theta, Eigen::Index n, RngStream& rng) {
  theta.validate();
  if (n <= 0) throw InvalidInputError("sample size must be positive");
  const Eigen::Index p = theta.dim();
  const Eigen::LLT<Eigen::MatrixXd> chol1(theta.sigma(ClassLabel::Class1));
  const Eigen::LLT<Eigen::MatrixXd> chol2(theta.sigma(ClassLabel::Class2));

  PartialSample sample;
  sample.features.resize(n, p);
  sample.labels.resize(static_cast<std::size_t>(n));
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool class1 = rng.bernoulli(theta.pi1);
    for (Eigen::Index d = 0; d < p; ++d) z[d] = rng.normal();
    const auto& chol = class1 ? chol1 : chol2;
    sample.features.row(j) =
        (theta.mean(class1 ? ClassLabel::Class1 : ClassLabel::Class2) +
         chol.matrixL() * z)
            .transpose();
    sample.labels[static_cast<std::size_t>(j)] =
        class1 ? ClassLabel::Class1 : ClassLabel::Class2;
  }
  return sample;
}

PartialSample apply_missingness(const PartialSample& sample,
                                const MissingnessMechanism& mechanism, RngStream& rng) {
  sample.validate();
  if (sample.n_unclassified() != 0)
    throw InvalidInputError("apply_missingness expects a fully labeled sample");
  PartialSample out = sample;

  if (const auto* mcar = std::get_if<Mcar>(&mechanism)) {
    if (!(mcar->gamma >= 0.0 && mcar->gamma <= 1.0))
      throw InvalidInputError("MCAR rate must lie in [0, 1]");
    for (auto& label : out.labels)
      if (rng.bernoulli(mcar->gamma)) label.reset();
    return out;
  }

  if (const auto* fixed = std::get_if<FixedCounts>(&mechanism)) {
    if (fixed->n1c < 0 || fixed->n2c < 0)
      throw InvalidInputError("FixedCounts labels kept must be nonnegative");
    for (ClassLabel c : {ClassLabel::Class1, ClassLabel::Class2}) {
      const int keep = c == ClassLabel::Class1 ? fixed->n1c : fixed->n2c;
      std::vector<Eigen::Index> members;
      for (Eigen::Index j = 0; j < sample.size(); ++j)
        if (*sample.labels[static_cast<std::size_t>(j)] == c) members.push_back(j);
      if (std::cmp_greater(keep, members.size()))
        throw InvalidInputError("FixedCounts exceeds the available class count");
      // partial Fisher-Yates: the first `keep` entries stay labeled
      for (std::size_t i = 0; i < static_cast<std::size_t>(keep); ++i) {
        const std::size_t pick =
            i + static_cast<std::size_t>(rng.uniform_below(members.size() - i));
        std::swap(members[i], members[pick]);
      }
      for (std::size_t i = static_cast<std::size_t>(keep); i < members.size(); ++i)
        out.labels[static_cast<std::size_t>(members[i])].reset();
    }
    return out;
  }

  const auto& entropy_logistic = std::get<EntropyLogistic>(mechanism);
  entropy_logistic.psi.validate();
  const MixtureDensity density(entropy_logistic.psi.theta);
  const MissingnessParams& xi = entropy_logistic.psi.xi;
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const double e = density.entropy(sample.features.row(j).transpose());
    if (rng.bernoulli(logistic(xi.xi0 + xi.xi1 * e)))
      out.labels[static_cast<std::size_t>(j)].reset();
  }
  return out;
}

double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size())
    throw InvalidInputError("adjusted_rand_index: length mismatch");
  if (labels_a.empty()) throw InvalidInputError("adjusted_rand_index: empty labelings");

  auto dense_ids = [](std::span<const int> labels) {
    std::unordered_map<int, int> ids;
    std::vector<int> mapped(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const auto [it, inserted] = ids.emplace(labels[j], static_cast<int>(ids.size()));
      mapped[j] = it->second;
    }
    return std::pair{std::move(mapped), ids.size()};
  };
  const auto [a, rows] = dense_ids(labels_a);
  const auto [b, cols] = dense_ids(labels_b);

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                                static_cast<Eigen::Index>(cols));
  for (std::size_t j = 0; j < a.size(); ++j) table(a[j], b[j]) += 1.0;

  auto comb2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_cells = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j) sum_cells += comb2(table(i, j));
  double sum_rows = 0.0, sum_cols = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) sum_rows += comb2(table.row(i).sum());
  for (Eigen::Index j = 0; j < table.cols(); ++j) sum_cols += comb2(table.col(j).sum());

  const double expected = sum_rows * sum_cols / comb2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both labelings trivial together
  return (sum_cells - expected) / (max_index - expected);
}

RuleEvaluation evaluate_rule(const MixtureParams& fitted, const PartialSample& test) {
  test.validate();
  const MixtureDensity density(fitted);
  std::vector<int> predicted(static_cast<std::size_t>(test.size()));
  for (Eigen::Index j = 0; j < test.size(); ++j)
    predicted[static_cast<std::size_t>(j)] =
        class_number(density.allocate(test.features.row(j).transpose()));
  return score_predictions(predicted, test);
}

RuleEvaluation evaluate_rule(const DiscriminantCoeffs& rule, const PartialSample& test) {
  test.validate();
  std::vector<int> predicted(static_cast<std::size_t>(test.size()));
  for (Eigen::Index j = 0; j < test.size(); ++j)
    predicted[static_cast<std::size_t>(j)] =
        class_number(bayes_allocate(test.features.row(j).transpose(), rule));
  return score_predictions(predicted, test);
}

void ExperimentConfig::validate() const {
  theta_true.validate();
  if (n <= 0 || n_test <= 0) throw InvalidInputError("n and n_test must be positive");
  if (replications <= 0) throw InvalidInputError("replications must be positive");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidInputError("alpha grid values must lie in [0, 1]");
  for (const auto& m : methods)
    if (m != "fsc" && m != "full")
      throw InvalidInputError("unknown method '" + m + "' (expected fsc or full)");
  fit.validate();
}

Eq2Result run_eq2_experiment(const ExperimentConfig& config, int k_max) {
  config.validate();
  if (k_max < 0) throw InvalidInputError("k_max must be nonnegative");
  const auto* fixed = std::get_if<FixedCounts>(&config.mechanism);
  if (!fixed)
    throw InvalidInputError("run_eq2_experiment requires the FixedCounts mechanism");

  const int reps = config.replications;
  Eq2Result result;
  result.per_replication_errors.resize(reps, k_max + 1);

  parallel_for(reps, config.threads, [&](int r) {
    RngStream rng_sample(config.seed, static_cast<std::uint64_t>(r),
                         StreamPurpose::kTrainingSample);
    const PartialSample complete = sample_mixture(config.theta_true, config.n, rng_sample);
    RngStream rng_missing(config.seed, static_cast<std::uint64_t>(r),
                          StreamPurpose::kMissingness);
    const PartialSample partial =
        apply_missingness(complete, config.mechanism, rng_missing);
    const FitResult fit = fit_cml(partial, config.fit, k_max);
    for (int k = 0; k <= k_max; ++k) {
      // past the fixed point the discriminant no longer moves
      const std::size_t idx =
          std::min(static_cast<std::size_t>(k), fit.beta_trace.size() - 1);
      result.per_replication_errors(r, k) =
          error_rate(fit.beta_trace[idx], config.theta_true);
    }
  });

  const ExpansionInputs base{mahalanobis_delta(config.theta_true),
                             static_cast<int>(config.theta_true.dim()), fixed->n1c,
                             fixed->n2c, 0};
  result.rows.resize(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) {
    std::vector<double> col(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r)
      col[static_cast<std::size_t>(r)] = result.per_replication_errors(r, k);
    const MeanSe ms = mean_se(col);
    ExpansionInputs in = base;
    in.k = k;
    result.rows[static_cast<std::size_t>(k)] = {k, ms.mean, ms.se, expected_error_cml(in)};
  }
  return result;
}

ReplicationReport run_figure1_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<double> alphas = config.alpha_grid;
  if (alphas.empty())
    for (int i = 1; i <= 19; ++i) alphas.push_back(0.05 * i);
  std::vector<std::string> methods = config.methods;
  if (methods.empty()) methods = {"fsc", "full"};
  const bool with_fsc = std::find(methods.begin(), methods.end(), "fsc") != methods.end();
  const bool with_full = std::find(methods.begin(), methods.end(), "full") != methods.end();
  const bool homoscedastic = config.theta_true.has_common_covariance();

  const int per_rep =
      (with_fsc ? static_cast<int>(alphas.size()) : 0) + (with_full ? 1 : 0);
  const int reps = config.replications;
  ReplicationReport report;
  report.records.resize(static_cast<std::size_t>(per_rep) * reps);

  parallel_for(reps, config.threads, [&](int r) {
    RngStream rng_sample(config.seed, static_cast<std::uint64_t>(r),
                         StreamPurpose::kTrainingSample);
    const PartialSample complete = sample_mixture(config.theta_true, config.n, rng_sample);
    RngStream rng_missing(config.seed, static_cast<std::uint64_t>(r),
                          StreamPurpose::kMissingness);
    const PartialSample partial =
        apply_missingness(complete, config.mechanism, rng_missing);
    RngStream rng_test(config.seed, static_cast<std::uint64_t>(r),
                       StreamPurpose::kTestSample);
    const PartialSample test = sample_mixture(config.theta_true, config.n_test, rng_test);

    auto resolve = [&](const MixtureParams& estimate) {
      if (partial.n_classified() > 0) return resolve_label_switching(estimate, partial);
      return resolve_label_switching(estimate, config.theta_true);
    };

    std::size_t slot = static_cast<std::size_t>(r) * static_cast<std::size_t>(per_rep);
    auto run_one = [&](const std::string& method, std::optional<double> alpha) {
      ReplicationRecord rec;
      rec.replication = r;
      rec.method = method;
      rec.alpha = alpha;
      try {
        const FitResult fit = method == "full"
                                  ? fit_full(partial, config.fit, homoscedastic)
                                  : fit_fsc(partial, *alpha, config.fit, homoscedastic);
        const RuleEvaluation eval = evaluate_rule(resolve(fit.theta), test);
        rec.ari = eval.ari;
        rec.error = eval.error;
        rec.ok = true;
      } catch (const Error& e) {
        rec.failure = e.what();
      }
      report.records[slot++] = std::move(rec);
    };
    if (with_fsc)
      for (double alpha : alphas) run_one("fsc", alpha);
    if (with_full) run_one("full", std::nullopt);
  });

  for (const auto& rec : report.records) report.failures += !rec.ok;
  if (report.failures * 10 > static_cast<int>(report.records.size()))
    throw Error("more than 10% of fits failed (" + std::to_string(report.failures) +
                " of " + std::to_string(report.records.size()) + ")");

  auto aggregate = [&report](const std::string& method, std::optional<double> alpha) {
    std::vector<double> aris, errors;
    int failed = 0;
    for (const auto& rec : report.records) {
      if (rec.method != method || rec.alpha != alpha) continue;
      if (!rec.ok) {
        ++failed;
        continue;
      }
      aris.push_back(rec.ari);
      errors.push_back(rec.error);
    }
    AggregateRow row;
    row.method = method;
    row.alpha = alpha;
    const MeanSe ma = mean_se(aris);
    const MeanSe me = mean_se(errors);
    row.mean_ari = ma.mean;
    row.se_ari = ma.se;
    row.mean_error = me.mean;
    row.se_error = me.se;
    row.n_ok = static_cast<int>(aris.size());
    row.n_failed = failed;
    return row;
  };
  if (with_fsc)
    for (double alpha : alphas) report.aggregates.push_back(aggregate("fsc", alpha));
  if (with_full) report.aggregates.push_back(aggregate("full", std::nullopt));
  return report;
}

AreGrid run_table1_grid(const std::vector<double>& pi1_values,
                        const std::vector<double>& delta_values, double gamma,
                        const QuadratureSpec& quad) {
  if (pi1_values.empty() || delta_values.empty())
    throw InvalidInputError("run_table1_grid: empty grid axis");
  AreGrid grid;
  grid.pi1_values = pi1_values;
  grid.delta_values = delta_values;
  grid.gamma = gamma;
  grid.values.resize(static_cast<Eigen::Index>(pi1_values.size()),
                     static_cast<Eigen::Index>(delta_values.size()));
  for (std::size_t i = 0; i < pi1_values.size(); ++i)
    for (std::size_t j = 0; j < delta_values.size(); ++j) {
      const MixtureParams theta =
          make_univariate(pi1_values[i], 0.0, delta_values[j], 1.0);
      grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          are_rule(theta, gamma, quad);
    }
  return grid;
}

}  // namespace partmix
