#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace incentive {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Actions are 1-based throughout the public API: a dataset with K actions
// carries labels in {1, ..., K}, and column k-1 of any per-action matrix
// refers to action k.
using Action = int;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between arguments (matrix sizes, vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument outside its documented domain (bad action index, empty group,
// nonpositive weights, malformed configuration).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Budget or instance constraints that admit no solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Training or solving produced a non-finite quantity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

inline void require_dims(bool condition, const std::string& message) {
  if (!condition) throw DimensionError(message);
}

}  // namespace incentive
