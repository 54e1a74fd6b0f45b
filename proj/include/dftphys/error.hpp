#pragma once

#include <stdexcept>
#include <string>

namespace dftphys {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed choice task (too few alternatives, chosen index out of range, non-finite attributes).
class InvalidTaskError : public Error {
public:
  using Error::Error;
};

/// A parameter outside its admissible domain.
class ParameterDomainError : public Error {
public:
  using Error::Error;
};

/// (I - S) numerically singular while S differs from the identity.
class IllConditionedFeedbackError : public Error {
public:
  using Error::Error;
};

/// Difference covariance of the preference vector is not positive definite.
class DegenerateCovarianceError : public Error {
public:
  DegenerateCovarianceError(const std::string& what, double smallest_eigenvalue)
      : Error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
  double smallest_eigenvalue_;
};

/// Orthant quadrature failed to reach the requested error.
class AccuracyError : public Error {
public:
  AccuracyError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved_error() const noexcept { return achieved_; }

private:
  double achieved_;
};

/// Bad or missing input data (CSV content, empty windows, flat channels).
class DataError : public Error {
public:
  using Error::Error;
};

/// Inconsistent model or link specification.
class SpecError : public Error {
public:
  using Error::Error;
};

/// Log-likelihood not finite at the starting values.
class StartValueError : public Error {
public:
  using Error::Error;
};

/// Likelihood-ratio inputs in the wrong order.
class OrderingError : public Error {
public:
  using Error::Error;
};

/// Hessian of the log-likelihood not invertible.
class SingularHessianError : public Error {
public:
  using Error::Error;
};

}  // namespace dftphys
