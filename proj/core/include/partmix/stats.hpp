#pragma once

#include <cmath>
#include <limits>

// Scalar probability helpers shared across the library. All log-domain
// variants are safe for arguments far into the tails (|x| up to ~1e4 for
// the logistic family, any finite x for the normal family).

namespace partmix {

inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

/// Standard normal density.
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x - 0.5 * kLogTwoPi);
}

/// Standard normal CDF via erfc; accurate in both tails.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// logistic(x) = 1 / (1 + exp(-x)); branch avoids exp overflow.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log logistic(x); never returns -inf for finite x.
inline double log_logistic(double x) { return -log1p_exp(-x); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(exp(a) + exp(b)) with the usual max shift.
inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace partmix
