#pragma once

#include "incentive/ccpo.hpp"
#include "incentive/common.hpp"
#include "incentive/dataset.hpp"

#include <cstdint>
#include <vector>

namespace incentive::crm {

// Affine input map shared by the propensity model and the policy. Both are
// linear in [(x - mean) / scale, 1], which spans the same function class as
// a linear model on raw x; the rescaling only conditions gradient descent.
struct InputScaling {
  Vector mean;
  Vector scale;

  static InputScaling fit(const Matrix& X);
  static InputScaling identity(Eigen::Index dim);
  // n x (d + 1), last column all ones.
  Matrix augment(const Matrix& X) const;
};

// Row-wise softmax of an n x K logit matrix.
Matrix softmax_rows(const Matrix& logits);

struct PropensityConfig {
  int iterations = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;  // on the non-intercept weights
  double clip_epsilon = 0.01;
  void validate() const;
};

// Multinomial logistic regression estimate of the logging policy.
struct PropensityModel {
  Matrix weights;  // K x (d + 1), last column is the intercept
  InputScaling scaling;
  double clip_epsilon = 0.01;

  int n_actions() const { return static_cast<int>(weights.rows()); }
  // n x K, rows sum to one.
  Matrix predict(const Matrix& X) const;
  // predict() with every entry raised to at least clip_epsilon (rows are
  // not renormalized; the clipped values only ever appear as denominators).
  Matrix predict_clipped(const Matrix& X) const;
};

// Full-batch gradient descent on the mean negative log-likelihood plus
// 0.5 * l2 * |W|^2, over every row of `data`.
PropensityModel fit_propensity(const BanditDataset& data, const PropensityConfig& cfg = {});

struct LinearSoftmaxPolicy {
  Matrix theta;  // K x (d + 1)
  InputScaling scaling;

  int n_actions() const { return static_cast<int>(theta.rows()); }
  Matrix probabilities(const Matrix& X) const;
  // Per-row argmax; ties go to the lower action index.
  std::vector<Action> assign(const Matrix& X) const;
};

struct ObjectiveValue {
  double value = 0.0;
  Matrix grad;  // same shape as theta
};

// (1/n) sum_i [(r_i - lambda) pi(y_i|x_i) / rho_i - eta sum_y c(y) pi(y|x_i)]
// and its gradient with respect to theta. `rho_logged` holds the clipped
// estimated propensity of each row's logged action.
ObjectiveValue crm_objective_grad(const LinearSoftmaxPolicy& policy, const Matrix& X,
                                  const std::vector<Action>& actions, const Vector& rewards,
                                  const Vector& rho_logged, const std::vector<double>& costs,
                                  double lambda, double eta);

struct CrmConfig {
  int epochs = 10;
  double learning_rate = 0.05;
  int batch_size = 128;
  // Bisection steps on eta once a feasible upper end is found.
  int eta_steps = 12;
  double eta_initial = 1.0;
  int eta_doublings = 40;
  PropensityConfig propensity;
  std::uint64_t seed = 0;
  void validate() const;
};

struct LambdaDiagnostic {
  double lambda = 0.0;
  double eta = 0.0;
  double s = 0.0;       // (1/n) sum pi / rho
  double snips = 0.0;   // IPS reward estimate divided by s
  double avg_cost = 0.0;
  bool feasible = false;
  // Pairs along the eta search where a larger eta gave a larger cost.
  int cost_monotonicity_violations = 0;
};

struct CrmResult {
  LinearSoftmaxPolicy policy;
  PropensityModel propensity;
  // Deterministic assignment of the training rows; lambda_star holds the
  // selected cost multiplier eta, est_reward the selected SNIPS value.
  ccpo::PolicySolution solution;
  std::vector<LambdaDiagnostic> diagnostics;
  std::size_t selected = 0;
};

// 10 evenly spaced values from 0 to the largest observed reward.
std::vector<double> default_lambda_grid(const BanditDataset& data, int count = 10);

// Trains on the train split of `data`. For every lambda, eta is searched so
// the argmax assignment of the training rows is the highest-cost one found
// within budget; the lambda with the largest SNIPS value wins (first on
// ties). Throws InfeasibleError when no lambda admits a feasible policy.
CrmResult run_banditnet_baseline(const BanditDataset& data, const ccpo::CostSchedule& sched,
                                 const std::vector<double>& lambda_grid, const CrmConfig& cfg);

}  // namespace incentive::crm
