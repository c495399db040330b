#include "partmix/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "partmix/detail/bfgs.hpp"
#include "partmix/detail/finite_diff.hpp"
#include "partmix/likelihoods.hpp"
#include "partmix/model.hpp"
#include "partmix/rng.hpp"
#include "partmix/stats.hpp"

namespace partmix {

namespace {

// Internal restart signal; never escapes the EM driver.
struct DegenerateComponent : Error {
  using Error::Error;
};

double variance_floor_value(const PartialSample& sample, double factor) {
  const Eigen::Index n = sample.size();
  const Eigen::Index p = sample.dim();
  const Eigen::RowVectorXd mean = sample.features.colwise().mean();
  const double total_cov_trace =
      (sample.features.rowwise() - mean).squaredNorm() / static_cast<double>(n);
  return factor * total_cov_trace / static_cast<double>(p);
}

// Clamps eigenvalues at the floor; sets *floored when clamping was needed.
Eigen::MatrixXd apply_floor(const Eigen::MatrixXd& sigma, double floor, bool* floored) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.eigenvalues().minCoeff() >= floor && sigma.allFinite()) return sigma;
  if (!sigma.allFinite() || !(floor > 0.0))
    throw DegenerateComponent("singular component covariance");
  *floored = true;
  const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
}

struct MStepResult {
  MixtureParams theta;
  bool floored = false;
};

// Weighted complete-data ML update. resp is n x 2; weights scale whole rows.
MStepResult weighted_m_step(const PartialSample& sample, const Eigen::MatrixXd& resp,
                            const Eigen::VectorXd& weights, bool homoscedastic,
                            const std::optional<double>& fixed_pi1, double floor) {
  const Eigen::Index p = sample.dim();
  const Eigen::VectorXd wr1 = resp.col(0).cwiseProduct(weights);
  const Eigen::VectorXd wr2 = resp.col(1).cwiseProduct(weights);
  const double mass1 = wr1.sum();
  const double mass2 = wr2.sum();
  const double wsum = mass1 + mass2;

  const double required = homoscedastic ? 0.5 : static_cast<double>(p + 1);
  if (mass1 < required || mass2 < required)
    throw DegenerateComponent("component responsibility mass below the guard");
  if (wsum < static_cast<double>(p + 2))
    throw DegenerateComponent("total responsibility mass below p+2");

  MStepResult out;
  out.theta.pi1 = fixed_pi1 ? *fixed_pi1 : mass1 / wsum;
  out.theta.mu1 = sample.features.transpose() * wr1 / mass1;
  out.theta.mu2 = sample.features.transpose() * wr2 / mass2;

  const Eigen::MatrixXd c1 = sample.features.rowwise() - out.theta.mu1.transpose();
  const Eigen::MatrixXd c2 = sample.features.rowwise() - out.theta.mu2.transpose();
  const Eigen::MatrixXd scatter1 = c1.transpose() * wr1.asDiagonal() * c1;
  const Eigen::MatrixXd scatter2 = c2.transpose() * wr2.asDiagonal() * c2;

  if (homoscedastic) {
    out.theta.covariance =
        CommonCovariance{apply_floor((scatter1 + scatter2) / wsum, floor, &out.floored)};
  } else {
    out.theta.covariance =
        PerClassCovariance{apply_floor(scatter1 / mass1, floor, &out.floored),
                           apply_floor(scatter2 / mass2, floor, &out.floored)};
  }
  return out;
}

Eigen::MatrixXd soft_responsibilities(const PartialSample& sample,
                                      const MixtureParams& theta) {
  const MixtureDensity density(theta);
  Eigen::MatrixXd resp(sample.size(), 2);
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (label) {
      resp(j, 0) = (*label == ClassLabel::Class1) ? 1.0 : 0.0;
      resp(j, 1) = 1.0 - resp(j, 0);
    } else {
      const TauPair t = density.tau(sample.features.row(j).transpose());
      resp(j, 0) = t.tau1;
      resp(j, 1) = t.tau2;
    }
  }
  return resp;
}

// Outright assignment of unlabeled rows; tau1 == tau2 goes to Class1.
Eigen::MatrixXd hard_responsibilities(const PartialSample& sample,
                                      const MixtureParams& theta,
                                      std::vector<std::uint8_t>* assignment) {
  Eigen::MatrixXd resp = soft_responsibilities(sample, theta);
  assignment->resize(static_cast<std::size_t>(sample.size()));
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const bool class1 = resp(j, 0) >= resp(j, 1);
    resp(j, 0) = class1 ? 1.0 : 0.0;
    resp(j, 1) = 1.0 - resp(j, 0);
    (*assignment)[static_cast<std::size_t>(j)] = class1 ? 0 : 1;
  }
  return resp;
}

Eigen::VectorXd row_weights(const PartialSample& sample, double w_labeled,
                            double w_unlabeled) {
  Eigen::VectorXd w(sample.size());
  for (Eigen::Index j = 0; j < sample.size(); ++j)
    w[j] = sample.is_missing(j) ? w_unlabeled : w_labeled;
  return w;
}

struct EmSpec {
  double w_labeled = 1.0;
  double w_unlabeled = 1.0;
  bool hard = false;
  std::function<double(const MixtureParams&)> objective;
};

void push_beta(FitResult* res, bool homoscedastic) {
  if (homoscedastic) res->beta_trace.push_back(discriminant_from_theta(res->theta));
}

FitResult run_em(const PartialSample& sample, MixtureParams theta0, const EmSpec& spec,
                 const FitOptions& options, bool homoscedastic, double floor,
                 int max_iterations) {
  const Eigen::VectorXd weights = row_weights(sample, spec.w_labeled, spec.w_unlabeled);
  FitResult res;
  res.theta = std::move(theta0);
  res.objective_trace.push_back(spec.objective(res.theta));
  push_beta(&res, homoscedastic);

  std::vector<std::uint8_t> assignment, prev_assignment;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd resp = spec.hard
                               ? hard_responsibilities(sample, res.theta, &assignment)
                               : soft_responsibilities(sample, res.theta);
    if (spec.hard) {
      if ((resp.col(0).cwiseProduct(weights)).sum() == 0.0 ||
          (resp.col(1).cwiseProduct(weights)).sum() == 0.0)
        throw DegenerateDataError("hard E-step produced an empty cluster");
      if (assignment == prev_assignment) {
        res.converged = true;  // exact fixed point of the hard assignment
        break;
      }
      prev_assignment = assignment;
    }

    MStepResult m = weighted_m_step(sample, resp, weights, homoscedastic,
                                    options.fixed_pi1, floor);
    res.at_variance_floor |= m.floored;
    res.theta = std::move(m.theta);
    res.iterations = it;
    const double previous = res.objective_trace.back();
    const double current = spec.objective(res.theta);
    res.objective_trace.push_back(current);
    push_beta(&res, homoscedastic);
    if (std::abs(current - previous) <= options.rel_tol * (1.0 + std::abs(current))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// One-hot initialization: labeled rows keep their label, unlabeled rows get
// a coin flip; the initial theta is the resulting M-step.
MixtureParams random_init(const PartialSample& sample, const FitOptions& options,
                          bool homoscedastic, double floor, std::uint64_t draw_index) {
  RngStream rng(options.seed, draw_index, StreamPurpose::kInitialization);
  Eigen::MatrixXd resp(sample.size(), 2);
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    const bool class1 = label ? (*label == ClassLabel::Class1) : rng.bernoulli(0.5);
    resp(j, 0) = class1 ? 1.0 : 0.0;
    resp(j, 1) = 1.0 - resp(j, 0);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sample.size());
  return weighted_m_step(sample, resp, ones, homoscedastic, options.fixed_pi1, floor)
      .theta;
}

// Supervised-style initializer from the labeled rows only.
MixtureParams init_from_classified(const PartialSample& sample, const FitOptions& options,
                                   bool homoscedastic, double floor) {
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(sample.size(), 2);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(sample.size());
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (!label) continue;
    resp(j, *label == ClassLabel::Class1 ? 0 : 1) = 1.0;
    weights[j] = 1.0;
  }
  return weighted_m_step(sample, resp, weights, homoscedastic, options.fixed_pi1, floor)
      .theta;
}

FitResult fit_em_driver(const PartialSample& sample, const EmSpec& spec,
                        const FitOptions& options, bool homoscedastic,
                        int max_iterations) {
  sample.validate();
  options.validate();
  if (sample.size() < sample.dim() + 2)
    throw InsufficientDataError("need at least p+2 observations");
  const double floor = variance_floor_value(sample, options.variance_floor_factor);

  const bool both_classes_labeled =
      sample.n_in_class(ClassLabel::Class1) > 0 && sample.n_in_class(ClassLabel::Class2) > 0;

  // Number of independent starts to run; the best final objective wins.
  // A deterministic primary initializer exists for Provided, and for
  // FromClassified when both classes appear among the labels; everything
  // else draws random one-hot starts.
  int multistarts = 1;
  bool primary_available = true;
  if (const auto* random = std::get_if<InitRandom>(&options.init)) {
    multistarts = std::max(1, random->restarts);
    primary_available = false;
  } else if (std::holds_alternative<InitFromClassified>(options.init) &&
             !both_classes_labeled) {
    multistarts = InitRandom{}.restarts;
    primary_available = false;
  }

  const int restart_budget = 3;  // extra random draws consumed by degenerate runs
  int restarts_used = 0;
  int successes = 0;
  std::optional<FitResult> best;

  for (std::uint64_t draw = 0; successes < multistarts; ++draw) {
    try {
      MixtureParams theta0;
      if (draw == 0 && primary_available) {
        if (const auto* provided = std::get_if<InitProvided>(&options.init))
          theta0 = provided->theta0;
        else
          theta0 = init_from_classified(sample, options, homoscedastic, floor);
      } else {
        theta0 = random_init(sample, options, homoscedastic, floor, draw);
      }
      FitResult run =
          run_em(sample, std::move(theta0), spec, options, homoscedastic, floor,
                 max_iterations);
      ++successes;
      if (!best || run.final_objective() > best->final_objective()) best = std::move(run);
    } catch (const DegenerateComponent&) {
      if (++restarts_used > restart_budget) break;
    }
  }
  if (!best)
    throw DegenerateDataError("degenerate component after " +
                              std::to_string(restarts_used) + " restarts");
  best->restarts_used = restarts_used;
  return *best;
}

double cml_objective(const MixtureParams& theta, const PartialSample& sample) {
  const MixtureDensity density(theta);
  double value = 0.0;
  for (Eigen::Index j = 0; j < sample.size(); ++j) {
    const Eigen::VectorXd y = sample.features.row(j).transpose();
    const Label& label = sample.labels[static_cast<std::size_t>(j)];
    if (label) {
      value += density.log_joint(*label, y);
    } else {
      value += std::max(density.log_joint(ClassLabel::Class1, y),
                        density.log_joint(ClassLabel::Class2, y));
    }
  }
  return value;
}

}  // namespace

void FitOptions::validate() const {
  if (max_iterations <= 0) throw InvalidInputError("max_iterations must be positive");
  if (!(rel_tol > 0.0)) throw InvalidInputError("rel_tol must be positive");
  if (!(variance_floor_factor > 0.0))
    throw InvalidInputError("variance_floor_factor must be positive");
  if (fixed_pi1 && !(*fixed_pi1 > 0.0 && *fixed_pi1 < 1.0))
    throw InvalidInputError("fixed_pi1 must lie in (0, 1)");
}

FitResult fit_supervised(const PartialSample& sample, bool homoscedastic) {
  sample.validate();
  if (sample.n_unclassified() != 0)
    throw InvalidInputError("fit_supervised requires a completely classified sample");
  const Eigen::Index n = sample.size();
  const Eigen::Index p = sample.dim();
  const Eigen::Index n1 = sample.n_in_class(ClassLabel::Class1);
  const Eigen::Index n2 = sample.n_in_class(ClassLabel::Class2);
  if (n1 == 0 || n2 == 0)
    throw InsufficientDataError("both classes must be present among the labels");

  FitResult res;
  res.theta.pi1 = static_cast<double>(n1) / static_cast<double>(n);
  Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd mu2 = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ClassLabel z = *sample.labels[static_cast<std::size_t>(j)];
    (z == ClassLabel::Class1 ? mu1 : mu2) += sample.features.row(j).transpose();
  }
  mu1 /= static_cast<double>(n1);
  mu2 /= static_cast<double>(n2);
  res.theta.mu1 = mu1;
  res.theta.mu2 = mu2;

  Eigen::MatrixXd scatter1 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd scatter2 = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ClassLabel z = *sample.labels[static_cast<std::size_t>(j)];
    const Eigen::VectorXd c =
        sample.features.row(j).transpose() - (z == ClassLabel::Class1 ? mu1 : mu2);
    (z == ClassLabel::Class1 ? scatter1 : scatter2) += c * c.transpose();
  }

  auto require_pd = [](const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw DegenerateDataError("singular within-class scatter");
    return sigma;
  };
  if (homoscedastic) {
    res.theta.covariance =
        CommonCovariance{require_pd((scatter1 + scatter2) / static_cast<double>(n))};
  } else {
    res.theta.covariance =
        PerClassCovariance{require_pd(scatter1 / static_cast<double>(n1)),
                           require_pd(scatter2 / static_cast<double>(n2))};
  }

  res.objective_trace.push_back(loglik_classified(res.theta, sample).value);
  if (homoscedastic) res.beta_trace.push_back(discriminant_from_theta(res.theta));
  res.converged = true;
  res.iterations = 0;
  return res;
}

FitResult fit_em_ignorable(const PartialSample& sample, const FitOptions& options,
                           bool homoscedastic) {
  EmSpec spec;
  spec.objective = [&sample](const MixtureParams& theta) {
    return loglik_ignorable(theta, sample).value;
  };
  return fit_em_driver(sample, spec, options, homoscedastic, options.max_iterations);
}

FitResult fit_cml(const PartialSample& sample, const FitOptions& options, int k_max) {
  sample.validate();
  options.validate();
  if (k_max < 0) throw InvalidInputError("k_max must be nonnegative");
  if (sample.n_in_class(ClassLabel::Class1) == 0 ||
      sample.n_in_class(ClassLabel::Class2) == 0)
    throw InsufficientDataError("fit_cml needs at least one classified point per class");

  const double floor = variance_floor_value(sample, options.variance_floor_factor);
  EmSpec spec;
  spec.hard = true;
  spec.objective = [&sample](const MixtureParams& theta) {
    return cml_objective(theta, sample);
  };
  try {
    MixtureParams theta0 = init_from_classified(sample, options, /*homoscedastic=*/true, floor);
    return run_em(sample, std::move(theta0), spec, options, /*homoscedastic=*/true, floor,
                  k_max);
  } catch (const DegenerateComponent& e) {
    throw DegenerateDataError(e.what());
  }
}

FitResult fit_fsc(const PartialSample& sample, double alpha, const FitOptions& options,
                  bool homoscedastic) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidInputError("alpha must lie in [0, 1]");
  if (alpha == 1.0 && sample.n_classified() == 0)
    throw InsufficientDataError("alpha = 1 needs labeled rows");
  if (alpha == 0.0 && sample.n_unclassified() == 0)
    throw InsufficientDataError("alpha = 0 needs unlabeled rows");
  EmSpec spec;
  spec.w_labeled = alpha;
  spec.w_unlabeled = 1.0 - alpha;
  spec.objective = [&sample, alpha](const MixtureParams& theta) {
    return fsc_objective(theta, sample, alpha).value;
  };
  return fit_em_driver(sample, spec, options, homoscedastic, options.max_iterations);
}

FitResult fit_full(const PartialSample& sample, const FitOptions& options,
                   bool homoscedastic) {
  sample.validate();
  options.validate();
  const Eigen::Index n_c = sample.n_classified();
  const Eigen::Index n_u = sample.n_unclassified();
  if (n_c == 0 || n_u == 0)
    throw InsufficientDataError("full-likelihood fit needs labeled and unlabeled rows");

  const FitResult base = fit_em_ignorable(sample, options, homoscedastic);
  FullParams psi0;
  psi0.theta = base.theta;
  psi0.xi.xi0 = logit(static_cast<double>(n_u) / static_cast<double>(sample.size()));
  psi0.xi.xi1 = options.fixed_xi1.value_or(0.0);

  const Eigen::Index p = sample.dim();
  const Eigen::VectorXd x0 = pack_full(psi0);
  detail::BfgsOptions bfgs_options;
  bfgs_options.max_iterations = options.max_iterations;
  bfgs_options.rel_tol = options.rel_tol;
  if (options.fixed_xi1) bfgs_options.frozen.push_back(static_cast<int>(x0.size() - 1));
  if (options.fixed_pi1) bfgs_options.frozen.push_back(0);

  const auto objective = [&](const Eigen::VectorXd& x) -> double {
    try {
      return loglik_full(unpack_full(x, p, homoscedastic), sample).value;
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  detail::BfgsResult opt = bfgs_maximize(objective, x0, bfgs_options);

  FitResult res;
  const FullParams psi_hat = unpack_full(opt.x, p, homoscedastic);
  res.theta = psi_hat.theta;
  res.xi = psi_hat.xi;
  res.objective_trace = std::move(opt.trace);
  res.iterations = opt.iterations;
  res.converged = opt.converged;

  if (!res.converged) {
    Eigen::VectorXd g = detail::central_gradient(objective, opt.x, bfgs_options.fd_step);
    for (int i : bfgs_options.frozen) g[i] = 0.0;
    if (g.norm() <= 1e-4 * (1.0 + std::abs(opt.objective))) {
      res.converged = true;  // at the optimum within finite-difference resolution
    } else if (opt.line_search_failed) {
      throw NonConvergenceError("full-likelihood line search failed", std::move(res));
    }
  }
  return res;
}

MixtureParams resolve_label_switching(const MixtureParams& estimate,
                                      const PartialSample& reference) {
  auto agreement = [&reference](const MixtureParams& theta) {
    const MixtureDensity density(theta);
    Eigen::Index score = 0;
    for (Eigen::Index j = 0; j < reference.size(); ++j) {
      const Label& label = reference.labels[static_cast<std::size_t>(j)];
      if (!label) continue;
      score += density.allocate(reference.features.row(j).transpose()) == *label;
    }
    return score;
  };
  const MixtureParams swapped = estimate.swapped();
  return agreement(swapped) > agreement(estimate) ? swapped : estimate;
}

MixtureParams resolve_label_switching(const MixtureParams& estimate,
                                      const MixtureParams& reference) {
  const double direct = (estimate.mu1 - reference.mu1).norm() +
                        (estimate.mu2 - reference.mu2).norm();
  const double crossed = (estimate.mu1 - reference.mu2).norm() +
                         (estimate.mu2 - reference.mu1).norm();
  return crossed < direct ? estimate.swapped() : estimate;
}

Eigen::Index packed_theta_size(Eigen::Index p, bool homoscedastic) {
  const Eigen::Index tri = p * (p + 1) / 2;
  return 1 + 2 * p + (homoscedastic ? tri : 2 * tri);
}

namespace {

void pack_cholesky(const Eigen::MatrixXd& sigma, Eigen::VectorXd& x, Eigen::Index& at) {
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw DegenerateDataError("cannot factorize covariance for packing");
  const Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index c = 0; c < sigma.cols(); ++c)
    for (Eigen::Index r = c; r < sigma.rows(); ++r)
      x[at++] = (r == c) ? std::log(l(r, c)) : l(r, c);
}

Eigen::MatrixXd unpack_cholesky(const Eigen::VectorXd& x, Eigen::Index p,
                                Eigen::Index& at) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = c; r < p; ++r) {
      const double v = x[at++];
      l(r, c) = (r == c) ? std::exp(v) : v;
    }
  return l * l.transpose();
}

}  // namespace

Eigen::VectorXd pack_theta(const MixtureParams& theta) {
  const Eigen::Index p = theta.dim();
  Eigen::VectorXd x(packed_theta_size(p, theta.has_common_covariance()));
  x[0] = logit(theta.pi1);
  x.segment(1, p) = theta.mu1;
  x.segment(1 + p, p) = theta.mu2;
  Eigen::Index at = 1 + 2 * p;
  if (theta.has_common_covariance()) {
    pack_cholesky(theta.common_sigma(), x, at);
  } else {
    pack_cholesky(theta.sigma(ClassLabel::Class1), x, at);
    pack_cholesky(theta.sigma(ClassLabel::Class2), x, at);
  }
  return x;
}

MixtureParams unpack_theta(const Eigen::VectorXd& x, Eigen::Index p, bool homoscedastic) {
  if (x.size() != packed_theta_size(p, homoscedastic))
    throw InvalidInputError("packed vector length mismatch");
  MixtureParams theta;
  theta.pi1 = logistic(x[0]);
  theta.mu1 = x.segment(1, p);
  theta.mu2 = x.segment(1 + p, p);
  Eigen::Index at = 1 + 2 * p;
  if (homoscedastic) {
    theta.covariance = CommonCovariance{unpack_cholesky(x, p, at)};
  } else {
    Eigen::MatrixXd s1 = unpack_cholesky(x, p, at);
    Eigen::MatrixXd s2 = unpack_cholesky(x, p, at);
    theta.covariance = PerClassCovariance{std::move(s1), std::move(s2)};
  }
  return theta;
}

Eigen::VectorXd pack_full(const FullParams& psi) {
  const Eigen::VectorXd t = pack_theta(psi.theta);
  Eigen::VectorXd x(t.size() + 2);
  x.head(t.size()) = t;
  x[t.size()] = psi.xi.xi0;
  x[t.size() + 1] = psi.xi.xi1;
  return x;
}

FullParams unpack_full(const Eigen::VectorXd& x, Eigen::Index p, bool homoscedastic) {
  const Eigen::Index t = packed_theta_size(p, homoscedastic);
  if (x.size() != t + 2) throw InvalidInputError("packed vector length mismatch");
  FullParams psi;
  psi.theta = unpack_theta(x.head(t), p, homoscedastic);
  psi.xi.xi0 = x[t];
  psi.xi.xi1 = x[t + 1];
  return psi;
}

}  // namespace partmix
