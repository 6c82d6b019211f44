#pragma once

#include "incentive/common.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace incentive::isorates {

// Weighted least-squares projection onto nondecreasing vectors
// (pool-adjacent-violators). Weights must be positive.
std::vector<double> pava(const std::vector<double>& values, const std::vector<double>& weights);

// sum_k w_k (fit_k - values_k)^2
double weighted_sse(const std::vector<double>& fit, const std::vector<double>& values,
                    const std::vector<double>& weights);

// Least squares over functions constant in x for each action: column means.
std::vector<double> ls_constant_fit(const Matrix& R);

// Least squares over nondecreasing constant-per-action functions: PAVA on
// the column means, each weighted by the number of rows.
std::vector<double> ls_monotone_fit(const Matrix& R);

struct RateConfig {
  std::vector<int> K_grid{2, 8, 32, 128};
  int n = 50;
  double sigma = 1.0;
  int trials = 200;
  std::uint64_t seed = 0;
  void validate() const;
};

struct RateRow {
  int K = 0;
  double mean_error_constant = 0.0;
  double mean_error_monotone = 0.0;
  double std_error_constant = 0.0;  // sample std over trials
  double std_error_monotone = 0.0;
};

struct RateTable {
  int n = 0;
  double sigma = 0.0;
  int trials = 0;
  std::vector<RateRow> rows;

  void write_csv(std::ostream& out) const;
};

// For each K and trial: f* is a sorted vector of K uniforms on [0, 1],
// R(i, k) = f*_k + sigma * w_ik with standard Gaussian w, and both fits are
// scored by (1/K) sum_k (fit_k - f*_k)^2. Trial t of grid entry K uses its
// own stream, so results do not depend on evaluation order.
RateTable rate_experiment(const RateConfig& cfg);

}  // namespace incentive::isorates
