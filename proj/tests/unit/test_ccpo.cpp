#include "incentive/ccpo.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace incentive;
using namespace incentive::ccpo;

namespace {

double row_order_sum(const Matrix& F, const std::vector<Action>& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += F(static_cast<Eigen::Index>(i), a[i] - 1);
  return total;
}

long total_cost(const std::vector<Action>& a, const std::vector<int>& costs) {
  long total = 0;
  for (Action k : a) total += costs[static_cast<std::size_t>(k - 1)];
  return total;
}

std::vector<double> as_real(const std::vector<int>& costs) { return {costs.begin(), costs.end()}; }

std::vector<Action> row_argmax(const Matrix& F) {
  std::vector<Action> out;
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    Eigen::Index best = 0;
    F.row(i).maxCoeff(&best);
    out.push_back(static_cast<Action>(best + 1));
  }
  return out;
}

}  // namespace

TEST(CostSchedule, Validation) {
  CostSchedule ok{{0, 1, 2}, 1.0};
  EXPECT_NO_THROW(ok.validate());
  EXPECT_THROW((CostSchedule{{0, 2, 1}, 1.0}).validate(), ValidationError);
  EXPECT_THROW((CostSchedule{{-1, 2}, 1.0}).validate(), ValidationError);
  EXPECT_THROW((CostSchedule{{0, 1}, -0.5}).validate(), ValidationError);
}

TEST(Greedy, LambdaZeroIsRowArgmax) {
  std::mt19937_64 rng(1);
  const Matrix F = oracles::random_matrix(30, 5, rng, 0.0, 1.0);
  EXPECT_EQ(greedy_for_lambda(F, {{0, 1, 2, 3, 4}, 2.0}, 0.0), row_argmax(F));
}

TEST(Greedy, LargeLambdaPicksCheapest) {
  std::mt19937_64 rng(2);
  const Matrix F = oracles::random_matrix(30, 5, rng, 0.0, 1.0);
  const std::vector<double> costs{0, 1, 2, 3, 4};
  const double lambda = max_reward_cost_slope(F, costs) + 1e-6;
  for (Action a : greedy_for_lambda(F, {costs, 1.0}, lambda)) EXPECT_EQ(a, 1);
}

TEST(Greedy, SingleRowExample) {
  const Matrix F{{0.1, 0.5}};
  EXPECT_EQ(greedy_for_lambda(F, {{0, 1}, 1.0}, 0.3), std::vector<Action>{2});
  EXPECT_EQ(greedy_for_lambda(F, {{0, 1}, 1.0}, 0.5), std::vector<Action>{1});  // tie -> cheaper
}

TEST(Greedy, AverageCostNonincreasingInLambda) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix F = oracles::random_matrix(200, 5, rng, 0.0, 1.0);
    const CostSchedule sched{{0, 1, 2, 3, 4}, 2.0};
    const double top = max_reward_cost_slope(F, sched.costs) * 1.2;
    double previous = average_cost(greedy_for_lambda(F, sched, 0.0), sched.costs);
    for (int s = 1; s < 100; ++s) {
      const double c = average_cost(greedy_for_lambda(F, sched, top * s / 99.0), sched.costs);
      ASSERT_LE(c, previous);
      previous = c;
    }
    EXPECT_EQ(previous, 0.0);
  }
}

TEST(Lagrangian, SlackBudgetReturnsArgmax) {
  std::mt19937_64 rng(4);
  const Matrix F = oracles::random_matrix(40, 5, rng, 0.0, 1.0);
  const auto sol = lagrangian_search(F, {{0, 1, 2, 3, 4}, 4.0});
  EXPECT_EQ(sol.lambda_star, 0.0);
  EXPECT_EQ(sol.assignment, row_argmax(F));
}

TEST(Lagrangian, IdenticalLinearCustomers) {
  Matrix F(10, 5);
  for (int i = 0; i < 10; ++i) {
    for (int k = 1; k <= 5; ++k) F(i, k - 1) = k / 5.0;
  }
  const auto sol = lagrangian_search(F, {{0, 1, 2, 3, 4}, 2.0});
  EXPECT_NEAR(sol.avg_cost, 2.0, 1e-12);
  EXPECT_NEAR(sol.est_reward, 0.6, 1e-12);
}

TEST(Lagrangian, NeverAboveDpAndOptimalForItsOwnCost) {
  std::mt19937_64 rng(5);
  const std::vector<int> costs{0, 1, 2, 3, 4};
  int saturated = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix F = oracles::random_matrix(6, 5, rng, 0.0, 1.0);
    const double m = std::uniform_int_distribution<int>(0, 24)(rng) / 6.0;
    const auto sol = lagrangian_search(F, {as_real(costs), m});
    ASSERT_LE(sol.avg_cost, m + 1e-12);
    const auto dp = dp_allocate(F, costs, static_cast<long>(std::floor(m * 6 + 1e-9)));
    EXPECT_LE(sol.est_reward, dp.total_reward / 6.0 + 1e-9);
    // The returned assignment is a Lagrangian maximizer, hence optimal for
    // the budget it actually spends.
    const long spent = total_cost(sol.assignment, costs);
    const auto own = dp_allocate(F, costs, spent);
    EXPECT_NEAR(sol.est_reward, own.total_reward / 6.0, 1e-9);
    if (spent == static_cast<long>(std::floor(m * 6 + 1e-9))) {
      ++saturated;
      EXPECT_NEAR(sol.est_reward, dp.total_reward / 6.0, 1e-9);
    }
  }
  EXPECT_GT(saturated, 0);
}

TEST(Lagrangian, InfeasibleBudget) {
  const Matrix F{{0.1, 0.5}};
  EXPECT_THROW(lagrangian_search(F, {{1, 2}, 0.5}), InfeasibleError);
}

TEST(Dp, TwoCustomerExample) {
  const Matrix F{{0.1, 0.5}, {0.2, 0.4}};
  const auto a = dp_allocate(F, {0, 1}, 1);
  EXPECT_EQ(a.assignment, (std::vector<Action>{2, 1}));
  EXPECT_NEAR(a.total_reward, 0.7, 1e-15);
}

TEST(Dp, UnconstrainedIsArgmax) {
  std::mt19937_64 rng(6);
  const Matrix F = oracles::random_matrix(25, 5, rng, 0.0, 1.0);
  EXPECT_EQ(dp_allocate(F, {0, 1, 2, 3, 4}, 25 * 4).assignment, row_argmax(F));
  EXPECT_EQ(dp_allocate(F, {0, 1, 2, 3, 4}, 1000).assignment, row_argmax(F));
}

TEST(Dp, MatchesBruteForce) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = oracles::random_allocation(rng);
    const auto dp = dp_allocate(inst.F, inst.costs, inst.budget);
    const auto bf = brute_force_allocate(inst.F, inst.costs, inst.budget);
    ASSERT_LE(total_cost(dp.assignment, inst.costs), inst.budget);
    ASSERT_EQ(row_order_sum(inst.F, dp.assignment), row_order_sum(inst.F, bf.assignment)) << "trial " << trial;
    EXPECT_NEAR(dp.total_reward, bf.total_reward, 1e-12);
  }
}

TEST(Dp, InfeasibleBudget) {
  EXPECT_THROW(dp_allocate(Matrix::Ones(3, 2), {1, 2}, 2), InfeasibleError);
}

TEST(BruteForce, SingleCustomerBestAffordable) {
  const Matrix F{{0.1, 0.3, 0.9}};
  const auto a = brute_force_allocate(F, {0, 1, 5}, 2);
  EXPECT_EQ(a.assignment, std::vector<Action>{2});
  EXPECT_DOUBLE_EQ(a.total_reward, 0.3);
}

TEST(BruteForce, ZeroBudget) {
  const Matrix F{{0.1, 0.3, 0.9}, {0.5, 0.2, 0.7}};
  const auto a = brute_force_allocate(F, {0, 0, 1}, 0);
  EXPECT_EQ(a.assignment, (std::vector<Action>{2, 1}));
}

TEST(DpPolicy, PerCustomerBudget) {
  std::mt19937_64 rng(8);
  const Matrix F = oracles::random_matrix(50, 5, rng, 0.0, 1.0);
  const auto sol = dp_policy(F, {{0, 1, 2, 3, 4}, 1.5});
  EXPECT_LE(sol.avg_cost, 1.5 + 1e-12);
  EXPECT_NEAR(sol.est_reward, average_value(F, sol.assignment), 1e-12);
  const auto lag = lagrangian_search(F, {{0, 1, 2, 3, 4}, 1.5});
  EXPECT_GE(sol.est_reward, lag.est_reward - 1e-12);
  EXPECT_THROW(dp_policy(F, {{0, 0.5, 1, 2, 3}, 1.0}), ValidationError);
  const auto j = sol.to_json();
  EXPECT_EQ(j.at("assignment").size(), 50u);
}
