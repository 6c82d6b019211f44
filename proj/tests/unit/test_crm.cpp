#include "incentive/crm.hpp"
#include "incentive/simgen.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace incentive;
using namespace incentive::crm;

namespace {

Vector logged_propensity(const Matrix& P, const std::vector<Action>& actions) {
  Vector out(static_cast<Eigen::Index>(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = P(static_cast<Eigen::Index>(i), actions[i] - 1);
  }
  return out;
}

CrmConfig quick_config(std::uint64_t seed) {
  CrmConfig cfg;
  cfg.epochs = 3;
  cfg.eta_steps = 6;
  cfg.propensity.iterations = 100;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(1);
  const Matrix P = softmax_rows(oracles::random_matrix(20, 4, rng, -50, 50));
  for (Eigen::Index i = 0; i < P.rows(); ++i) EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-12);
  EXPECT_TRUE(P.allFinite());
}

TEST(Propensity, ZeroWeightsAreUniform) {
  PropensityModel model;
  model.scaling = InputScaling::identity(3);
  model.weights = Matrix::Zero(4, 4);
  std::mt19937_64 rng(2);
  const Matrix P = model.predict(oracles::random_matrix(10, 3, rng));
  EXPECT_LE((P.array() - 0.25).abs().maxCoeff(), 1e-15);
}

TEST(Propensity, CloseToTrueLoggingPolicy) {
  const auto gt = simgen::sample_ground_truth(3);
  const auto data = simgen::simulate_dataset(gt, 500, 4);
  const auto model = fit_propensity(data);
  const Matrix X = simgen::sample_contexts(1000, 5);
  const Matrix P = model.predict(X);
  double tv = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-9);
    const Vector truth = simgen::logging_probs(X.row(i).transpose());
    tv += 0.5 * (P.row(i).transpose() - truth).cwiseAbs().sum();
  }
  EXPECT_LT(tv / X.rows(), 0.15);
  const Matrix C = model.predict_clipped(X);
  EXPECT_GE(C.minCoeff(), model.clip_epsilon);
  EXPECT_LE((1.0 / C.array()).maxCoeff(), 1.0 / model.clip_epsilon);
}

TEST(Propensity, MissingActionRejected) {
  BanditDataset d;
  d.n_actions = 3;
  d.features = Matrix::Ones(4, 2);
  d.actions = {1, 1, 2, 2};
  d.rewards = Vector::Zero(4);
  d.splits.assign(4, Split::kTrain);
  EXPECT_THROW(fit_propensity(d), ValidationError);
}

TEST(Objective, MatchingPolicyRecoversMeanReward) {
  const auto gt = simgen::sample_ground_truth(6);
  const auto data = simgen::simulate_dataset(gt, 60, 7);
  const auto model = fit_propensity(data, {.iterations = 50});
  LinearSoftmaxPolicy policy;
  policy.theta = model.weights;
  policy.scaling = model.scaling;
  const Vector rho = logged_propensity(model.predict(data.features), data.actions);
  const auto obj = crm_objective_grad(policy, data.features, data.actions, data.rewards, rho,
                                      {0, 1, 2, 3, 4}, 0.0, 0.0);
  EXPECT_NEAR(obj.value, data.rewards.mean(), 1e-12);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto c = oracles::crm_grad_case(seed);
    const double err = oracles::crm_gradient_error(c.policy, c.X, c.actions, c.rewards, c.rho, c.costs,
                                                   c.lambda, c.eta);
    EXPECT_LT(err, 1e-5) << "case " << seed;
  }
}

TEST(Objective, MaxRewardLambdaIsNonpositive) {
  const auto c = oracles::crm_grad_case(9);
  const auto obj = crm_objective_grad(c.policy, c.X, c.actions, c.rewards, c.rho, c.costs,
                                      c.rewards.maxCoeff(), 0.0);
  EXPECT_LE(obj.value, 0.0);
}

TEST(Objective, DimensionChecks) {
  const auto c = oracles::crm_grad_case(10);
  EXPECT_THROW(crm_objective_grad(c.policy, c.X, c.actions, c.rewards.head(3), c.rho, c.costs, 0, 0),
               DimensionError);
}

TEST(LambdaGrid, EvenlySpaced) {
  BanditDataset d;
  d.n_actions = 2;
  d.actions = {1, 2, 1};
  d.rewards = Vector{{0.2, 0.9, 0.45}};
  const auto grid = default_lambda_grid(d);
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 0.0);
  EXPECT_DOUBLE_EQ(grid.back(), 0.9);
  EXPECT_NEAR(grid[1], 0.1, 1e-15);
}

TEST(Baseline, DegenerateRewardsPickFirstLambda) {
  const auto gt = simgen::sample_ground_truth(11);
  auto data = simgen::simulate_dataset(gt, 40, 12);
  data.rewards.setConstant(0.5);
  const auto result = run_banditnet_baseline(data, {{0, 0, 0, 0, 0}, 0.0}, {0.1, 0.3, 0.5}, quick_config(1));
  ASSERT_EQ(result.diagnostics.size(), 3u);
  for (const auto& d : result.diagnostics) EXPECT_NEAR(d.snips, 0.5, 1e-12);
  EXPECT_EQ(result.selected, 0u);
}

TEST(Baseline, SolutionWithinBudget) {
  const auto gt = simgen::sample_ground_truth(13);
  const auto data = simgen::simulate_dataset(gt, 100, 14);
  for (double m : {1.0, 2.0, 3.0}) {
    const auto result = run_banditnet_baseline(data, {{0, 1, 2, 3, 4}, m}, default_lambda_grid(data, 4),
                                               quick_config(2));
    EXPECT_LE(result.solution.avg_cost, m + 1e-6);
    EXPECT_TRUE(result.diagnostics[result.selected].feasible);
    const auto train = data.subset(Split::kTrain);
    EXPECT_EQ(result.solution.assignment, result.policy.assign(train.features));
    for (const auto& d : result.diagnostics) {
      if (d.feasible) {
        EXPECT_LE(d.snips, result.diagnostics[result.selected].snips);
      }
    }
  }
}

TEST(Baseline, Deterministic) {
  const auto gt = simgen::sample_ground_truth(15);
  const auto data = simgen::simulate_dataset(gt, 60, 16);
  const auto grid = default_lambda_grid(data, 3);
  const auto a = run_banditnet_baseline(data, {{0, 1, 2, 3, 4}, 2.0}, grid, quick_config(3));
  const auto b = run_banditnet_baseline(data, {{0, 1, 2, 3, 4}, 2.0}, grid, quick_config(3));
  EXPECT_EQ(a.policy.theta, b.policy.theta);
  EXPECT_EQ(a.solution.assignment, b.solution.assignment);
}

TEST(Baseline, InfeasibleBudget) {
  const auto gt = simgen::sample_ground_truth(17);
  const auto data = simgen::simulate_dataset(gt, 40, 18);
  EXPECT_THROW(run_banditnet_baseline(data, {{1, 2, 3, 4, 5}, 0.5}, {0.0}, quick_config(4)),
               InfeasibleError);
}
