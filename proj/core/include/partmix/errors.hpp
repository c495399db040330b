#pragma once

#include <stdexcept>
#include <string>

namespace partmix {

/// Base class for all partmix errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input values (non-finite features, bad alpha, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a model variant it does not support
/// (e.g. a linear discriminant from a per-class covariance model).
class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

/// Matrix condition estimate above the configured cap, or numerically
/// rank-deficient where full rank is required.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

/// Not enough observations to carry out the fit (e.g. a class absent).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Degenerate configuration discovered while fitting: singular scatter,
/// an empty hard cluster, a zero discriminant vector.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Quadrature refinement failed to converge within its cap.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// File or config parsing failure; message carries row/column coordinates.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Command-line usage error (unknown subcommand, bad flag).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace partmix
