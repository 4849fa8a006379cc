#pragma once

#include <stdexcept>
#include <string>

namespace qvest {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or violated parameter invariant. Detected before any
// numerical work starts.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The stencil does not fit in the grid along the requested direction.
class GridTooSmallError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Increment order too small for the requested constant.
class OrderTooSmallError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Inputs were valid but the computation could not be completed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NoValidPairError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateDenominatorError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IndefiniteCovarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmbeddingFailureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qvest
