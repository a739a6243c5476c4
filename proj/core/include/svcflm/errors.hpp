#pragma once

#include <stdexcept>
#include <string>

namespace svcflm {

// Argument outside the domain of a basis or other bounded quantity.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Sizes that should agree do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A least-squares or QR problem whose design does not have full column rank.
class SingularFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An eigen/square-root decomposition that cannot be carried out.
class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Overflow or NaN inside an iterative routine.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. what() carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svcflm
