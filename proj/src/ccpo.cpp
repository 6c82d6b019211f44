#include "incentive/ccpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace incentive::ccpo {
namespace {

void check_matrix(const Matrix& F, int n_actions) {
  require_dims(F.cols() == n_actions, "estimate matrix has " + std::to_string(F.cols()) +
                                          " columns but the cost schedule has " +
                                          std::to_string(n_actions) + " actions");
  require(F.rows() >= 1, "estimate matrix has no rows");
  require(F.allFinite(), "estimate matrix contains non-finite entries");
}

void check_int_costs(const Matrix& F, const std::vector<int>& costs) {
  require_dims(F.cols() == static_cast<Eigen::Index>(costs.size()),
               "estimate matrix width differs from the number of costs");
  require(!costs.empty(), "no actions");
  for (int c : costs) require(c >= 0, "costs must be nonnegative");
}

}  // namespace

void CostSchedule::validate() const {
  require(!costs.empty(), "cost schedule has no actions");
  for (std::size_t k = 0; k < costs.size(); ++k) {
    require(std::isfinite(costs[k]) && costs[k] >= 0.0, "costs must be finite and nonnegative");
    if (k > 0) require(costs[k] >= costs[k - 1], "costs must be nondecreasing in action order");
  }
  require(std::isfinite(budget_per_customer) && budget_per_customer >= 0.0,
          "budget must be finite and nonnegative");
}

nlohmann::json PolicySolution::to_json() const {
  return {{"assignment", assignment},
          {"lambda_star", lambda_star},
          {"avg_cost", avg_cost},
          {"est_reward", est_reward}};
}

double average_cost(const std::vector<Action>& assignment, const std::vector<double>& costs) {
  require(!assignment.empty(), "empty assignment");
  double total = 0.0;
  for (Action a : assignment) total += costs.at(static_cast<std::size_t>(a - 1));
  return total / static_cast<double>(assignment.size());
}

double average_value(const Matrix& F, const std::vector<Action>& assignment) {
  require_dims(F.rows() == static_cast<Eigen::Index>(assignment.size()),
               "assignment length differs from the number of rows");
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += F(static_cast<Eigen::Index>(i), assignment[i] - 1);
  }
  return total / static_cast<double>(assignment.size());
}

std::vector<Action> greedy_for_lambda(const Matrix& F, const CostSchedule& sched, double lambda) {
  sched.validate();
  check_matrix(F, sched.n_actions());
  require(lambda >= 0.0, "lambda must be nonnegative");
  // Scan actions from cheapest to most expensive; strict improvement keeps
  // the cheapest among ties.
  std::vector<int> order(static_cast<std::size_t>(sched.n_actions()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sched.costs[a] < sched.costs[b]; });
  std::vector<Action> out(static_cast<std::size_t>(F.rows()));
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    int best = order.front();
    double best_value = F(i, best) - lambda * sched.costs[best];
    for (int k : order) {
      const double value = F(i, k) - lambda * sched.costs[k];
      if (value > best_value) {
        best_value = value;
        best = k;
      }
    }
    out[static_cast<std::size_t>(i)] = best + 1;
  }
  return out;
}

double max_reward_cost_slope(const Matrix& F, const std::vector<double>& costs) {
  double slope = 0.0;
  const auto K = static_cast<Eigen::Index>(costs.size());
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    for (Eigen::Index a = 0; a < K; ++a) {
      for (Eigen::Index b = 0; b < K; ++b) {
        const double dc = costs[static_cast<std::size_t>(b)] - costs[static_cast<std::size_t>(a)];
        if (dc > 0.0) slope = std::max(slope, (F(i, b) - F(i, a)) / dc);
      }
    }
  }
  return slope;
}

PolicySolution lagrangian_search(const Matrix& F, const CostSchedule& sched, double tol) {
  sched.validate();
  check_matrix(F, sched.n_actions());
  require(tol > 0.0, "tolerance must be positive");
  const double m = sched.budget_per_customer;
  const double min_cost = *std::min_element(sched.costs.begin(), sched.costs.end());
  if (min_cost > m) {
    throw InfeasibleError("cheapest action costs " + std::to_string(min_cost) +
                          ", above the budget " + std::to_string(m));
  }
  // Guard against rounding in the mean; the exposed invariant is 1e-9.
  const double slack = 1e-12 * std::max(1.0, m);
  auto feasible = [&](const std::vector<Action>& a) {
    return average_cost(a, sched.costs) <= m + slack;
  };
  auto finish = [&](std::vector<Action> a, double lambda) {
    PolicySolution s;
    s.avg_cost = average_cost(a, sched.costs);
    s.est_reward = average_value(F, a);
    s.lambda_star = lambda;
    s.assignment = std::move(a);
    return s;
  };

  auto at_zero = greedy_for_lambda(F, sched, 0.0);
  if (feasible(at_zero)) return finish(std::move(at_zero), 0.0);

  double lo = 0.0;
  double hi = 1.0 + max_reward_cost_slope(F, sched.costs);
  auto hi_assignment = greedy_for_lambda(F, sched, hi);
  auto lo_assignment = std::move(at_zero);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    auto a = greedy_for_lambda(F, sched, mid);
    if (feasible(a)) {
      hi = mid;
      hi_assignment = std::move(a);
    } else {
      lo = mid;
      lo_assignment = std::move(a);
    }
  }

  // Rows whose choice differs across the final bracket sit at (or within
  // tol of) a breakpoint; switching them to the pricier choice spends the
  // remaining budget.
  struct Move {
    std::size_t row;
    double gain_per_cost;
  };
  std::vector<Move> moves;
  for (std::size_t i = 0; i < hi_assignment.size(); ++i) {
    const Action from = hi_assignment[i];
    const Action to = lo_assignment[i];
    if (from == to) continue;
    const double dc = sched.costs[static_cast<std::size_t>(to - 1)] -
                      sched.costs[static_cast<std::size_t>(from - 1)];
    if (dc <= 0.0) continue;
    const auto r = static_cast<Eigen::Index>(i);
    moves.push_back({i, (F(r, to - 1) - F(r, from - 1)) / dc});
  }
  std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) {
    return x.gain_per_cost > y.gain_per_cost;
  });
  const double n = static_cast<double>(hi_assignment.size());
  double total_cost = average_cost(hi_assignment, sched.costs) * n;
  const double cap = (m + slack) * n;
  for (const Move& mv : moves) {
    const Action from = hi_assignment[mv.row];
    const Action to = lo_assignment[mv.row];
    const double dc = sched.costs[static_cast<std::size_t>(to - 1)] -
                      sched.costs[static_cast<std::size_t>(from - 1)];
    if (total_cost + dc <= cap) {
      hi_assignment[mv.row] = to;
      total_cost += dc;
    }
  }
  return finish(std::move(hi_assignment), hi);
}

Allocation dp_allocate(const Matrix& F, const std::vector<int>& costs, long total_budget) {
  check_int_costs(F, costs);
  const auto n = static_cast<long>(F.rows());
  const int K = static_cast<int>(costs.size());
  const long min_cost = *std::min_element(costs.begin(), costs.end());
  if (total_budget < 0 || total_budget < n * min_cost) {
    throw InfeasibleError("total budget " + std::to_string(total_budget) +
                          " is below n * cheapest cost = " + std::to_string(n * min_cost));
  }
  // Budget beyond n * max cost is never binding.
  const long max_cost = *std::max_element(costs.begin(), costs.end());
  const long M = std::min(total_budget, n * max_cost);
  const auto width = static_cast<std::size_t>(M + 1);

  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });

  constexpr double kUnreachable = -std::numeric_limits<double>::infinity();
  // value[b]: best reward of the customers processed so far with total
  // cost <= b.
  std::vector<double> value(width, 0.0), next(width);
  std::vector<signed char> choice(static_cast<std::size_t>(n) * width, -1);
  for (long i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (long b = 0; b <= M; ++b) {
      double best = kUnreachable;
      int best_k = -1;
      for (int k : order) {
        const long c = costs[static_cast<std::size_t>(k)];
        if (c > b) continue;
        const double prev = value[static_cast<std::size_t>(b - c)];
        if (prev == kUnreachable) continue;
        const double cand = prev + F(row, k);
        if (cand > best) {
          best = cand;
          best_k = k;
        }
      }
      next[static_cast<std::size_t>(b)] = best;
      choice[static_cast<std::size_t>(i) * width + static_cast<std::size_t>(b)] =
          static_cast<signed char>(best_k);
    }
    std::swap(value, next);
  }

  Allocation out;
  out.total_reward = value[static_cast<std::size_t>(M)];
  out.assignment.assign(static_cast<std::size_t>(n), 0);
  long b = M;
  for (long i = n - 1; i >= 0; --i) {
    const int k = choice[static_cast<std::size_t>(i) * width + static_cast<std::size_t>(b)];
    out.assignment[static_cast<std::size_t>(i)] = k + 1;
    b -= costs[static_cast<std::size_t>(k)];
  }
  return out;
}

Allocation brute_force_allocate(const Matrix& F, const std::vector<int>& costs,
                                long total_budget) {
  check_int_costs(F, costs);
  const auto n = static_cast<std::size_t>(F.rows());
  const auto K = costs.size();
  double combos = std::pow(static_cast<double>(K), static_cast<double>(n));
  require(combos <= 1e6, "instance too large for brute force (K^n > 1e6)");

  // Visit actions per customer in cost order so the first optimum found
  // among exact ties uses cheaper actions first.
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });

  Allocation best;
  best.total_reward = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> digits(n, 0);
  const auto total = static_cast<long long>(combos);
  for (long long it = 0; it < total; ++it) {
    long cost = 0;
    double reward = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int k = order[digits[i]];
      cost += costs[static_cast<std::size_t>(k)];
      reward += F(static_cast<Eigen::Index>(i), k);
    }
    if (cost <= total_budget && reward > best.total_reward) {
      best.total_reward = reward;
      best.assignment.resize(n);
      for (std::size_t i = 0; i < n; ++i) best.assignment[i] = order[digits[i]] + 1;
    }
    // Little-endian increment: the last customer varies slowest.
    for (std::size_t i = 0; i < n; ++i) {
      if (++digits[i] < K) break;
      digits[i] = 0;
    }
  }
  if (best.assignment.empty()) throw InfeasibleError("no assignment fits the budget");
  return best;
}

PolicySolution dp_policy(const Matrix& F, const CostSchedule& sched) {
  sched.validate();
  check_matrix(F, sched.n_actions());
  std::vector<int> int_costs;
  for (double c : sched.costs) {
    require(c == std::floor(c), "dp_policy needs integer costs");
    int_costs.push_back(static_cast<int>(c));
  }
  const long M = static_cast<long>(
      std::floor(sched.budget_per_customer * static_cast<double>(F.rows()) + 1e-9));
  Allocation alloc = dp_allocate(F, int_costs, M);
  PolicySolution s;
  s.avg_cost = average_cost(alloc.assignment, sched.costs);
  s.est_reward = average_value(F, alloc.assignment);
  s.assignment = std::move(alloc.assignment);
  return s;
}

}  // namespace incentive::ccpo
