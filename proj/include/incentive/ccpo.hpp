#pragma once

#include "incentive/common.hpp"

#include <json.hpp>

#include <vector>

namespace incentive::ccpo {

// Per-action costs (nondecreasing in action order) and the maximal average
// cost per customer.
struct CostSchedule {
  std::vector<double> costs;
  double budget_per_customer = 0.0;

  int n_actions() const { return static_cast<int>(costs.size()); }
  void validate() const;
};

struct PolicySolution {
  std::vector<Action> assignment;
  double lambda_star = 0.0;
  double avg_cost = 0.0;
  double est_reward = 0.0;

  nlohmann::json to_json() const;
};

double average_cost(const std::vector<Action>& assignment, const std::vector<double>& costs);
double average_value(const Matrix& F, const std::vector<Action>& assignment);

// argmax_k F(i, k) - lambda * cost(k) per row; ties go to the cheapest action.
std::vector<Action> greedy_for_lambda(const Matrix& F, const CostSchedule& sched, double lambda);

// Largest reward-per-cost slope over all rows and action pairs with
// distinct costs (0 when no pair has a positive slope).
double max_reward_cost_slope(const Matrix& F, const std::vector<double>& costs);

// Bisection on lambda in [0, 1 + max slope] until the bracket is narrower
// than `tol`. The returned assignment is built from the two bracket ends:
// starting from the feasible (upper) end, rows are switched to their choice
// at the infeasible (lower) end, best reward-per-cost first, while the
// budget allows. Every row therefore stays a Lagrangian maximizer within the
// final bracket. Throws InfeasibleError when even the cheapest action
// exceeds the budget.
PolicySolution lagrangian_search(const Matrix& F, const CostSchedule& sched, double tol = 1e-10);

struct Allocation {
  std::vector<Action> assignment;
  double total_reward = 0.0;
};

// Exact maximizer of sum_i F(i, a_i) subject to sum_i cost(a_i) <= M for
// integer costs, by dynamic programming over (customer, budget used):
// O(n * M * K) time. Ties go to cheaper actions.
Allocation dp_allocate(const Matrix& F, const std::vector<int>& costs, long total_budget);

// Exhaustive search over all K^n assignments (K^n <= 1e6). Test oracle.
Allocation brute_force_allocate(const Matrix& F, const std::vector<int>& costs,
                                long total_budget);

// Wraps dp_allocate for a per-customer budget m: M = floor(m * n).
// Costs must be integral.
PolicySolution dp_policy(const Matrix& F, const CostSchedule& sched);

}  // namespace incentive::ccpo
