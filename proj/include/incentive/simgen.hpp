#pragma once

#include "incentive/common.hpp"
#include "incentive/dataset.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace incentive::simgen {

inline constexpr int kFeatureDim = 50;
inline constexpr int kNumActions = 5;
inline constexpr int kNumBumps = 50;
inline constexpr double kFeatureUpper = 10.0;
inline constexpr int kCalibrationDraws = 10000;
// f(x, y) = S((h(x) - mu) / sigma + y / kActionScale)
inline constexpr double kActionScale = 5.0;

// Hidden parameters of the fully-simulated reward. h(x) is a sum of
// kNumBumps Laplace-like bumps; mu and sigma standardize h over a fixed
// calibration sample drawn when the ground truth is created.
struct GroundTruth {
  Vector a;  // bump amplitudes, length kNumBumps
  Matrix b;  // bump decay rates, kNumBumps x kFeatureDim
  Matrix c;  // bump centers, kNumBumps x kFeatureDim
  double mu = 0.0;
  double sigma = 1.0;
  int n_actions = kNumActions;
};

enum class NoiseModel { kDeterministic, kBernoulli };

GroundTruth sample_ground_truth(std::uint64_t seed);

double h_eval(const GroundTruth& gt, std::span<const double> x);
double h_eval(const GroundTruth& gt, const Vector& x);

double sigmoid(double t);

// Mean reward of action y in {1..5} for context x. Strictly increasing in y.
double true_reward(const GroundTruth& gt, const Vector& x, Action y);
// All five actions at once (h evaluated a single time).
Vector true_reward_row(const GroundTruth& gt, const Vector& x);
// n x 5 matrix of true rewards for every row of X.
Matrix true_reward_matrix(const GroundTruth& gt, const Matrix& X);

// Logging policy: rho(y = i | x) = x_i / sum_{j <= n_actions} x_j.
double logging_prob(const Vector& x, Action y, int n_actions = kNumActions);
Vector logging_probs(const Vector& x, int n_actions = kNumActions);

struct SimOptions {
  NoiseModel noise = NoiseModel::kDeterministic;
  // Fraction of logged rows tagged as validation (the rest are train).
  // Test contexts are drawn fresh with sample_contexts.
  double validation_fraction = 0.2;
};

// Quota-filled logged data: contexts x ~ U(0, 10)^50, actions y ~ rho(.|x);
// pairs whose action already has n_per_action rows are discarded.
BanditDataset simulate_dataset(const GroundTruth& gt, int n_per_action,
                               std::uint64_t seed, SimOptions options = {});

// Same generator restricted to actions {1, 2}; rho renormalized over them.
BanditDataset simulate_binary_dataset(const GroundTruth& gt, int n_per_action,
                                      std::uint64_t seed,
                                      SimOptions options = {});

// Fresh contexts from the same distribution (used as held-out test sets).
Matrix sample_contexts(int n, std::uint64_t seed);

// Raw logging draws without quota truncation: counts of each action among
// n (x, y ~ rho(.|x)) pairs. Exposed so the quota-fill can be checked
// against the marginal action distribution.
std::vector<long> logged_action_histogram(long n, std::uint64_t seed,
                                          int n_actions = kNumActions);

// ---------------------------------------------------------------------------
// Nested-classification benchmark with synthetic features.

struct NestedSimConfig {
  int n_samples = 4608;
  int n_classes = 4;
  double neg_ratio = 10.0;
  int feature_dim = 32;
  std::vector<double> costs{3.0, 2.0, 1.0, 0.0};
  std::array<double, 3> split{0.6, 0.2, 0.2};
  // Scale of the random offsets between nested class means.
  double class_separation = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Actions are labels ordered from least specific (1) to most specific
// (n_classes). true_label is y* in {1..n_classes} for positives and 0 for
// negatives; the reward of label k is 1 iff the row is positive and k <= y*.
struct NestedDataset {
  BanditDataset data;
  std::vector<int> true_label;
  std::vector<double> costs;

  double reward(std::size_t row, Action label) const;
  // n x n_classes matrix of rewards for every row and label.
  Matrix reward_matrix() const;
  Matrix reward_matrix(const std::vector<std::size_t>& rows) const;
};

NestedDataset simulate_nested_dataset(const NestedSimConfig& cfg);

}  // namespace incentive::simgen
