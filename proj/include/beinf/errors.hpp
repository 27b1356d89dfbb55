#pragma once

#include <stdexcept>
#include <string>

namespace beinf {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// p0 + p1 = 1 where the beta component is required.
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// exp() of a linear predictor beyond the representable range.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

// Bad input data, configuration or model specification.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonIdentifiableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnseenLevelError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// File cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace beinf
