#pragma once

#include <stdexcept>
#include <string>

namespace cavchem {

// Bad input: parameters, grids or configuration outside their domain.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Physical domain violation (singular configuration, unstable quadratic form).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A computation ran but its result cannot be trusted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Critical point whose Hessian signature contradicts its expected type.
class ClassificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cavchem
