#pragma once

#include "incentive/common.hpp"
#include "incentive/crm.hpp"
#include "incentive/simgen.hpp"
#include "incentive/sire.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace incentive::evalbench {

// sqrt(mean((est - truth)^2))
double pehe(const Vector& est_ite, const Vector& true_ite);
// Root mean squared difference over every entry of two equal-shape matrices.
double rmse(const Matrix& est, const Matrix& truth);
// RMSE of the model against the true reward over all rows of test_X and all
// actions.
double rmse_reward(const sire::RewardModel& model, const simgen::GroundTruth& gt,
                   const Matrix& test_X);
// Mean of true_reward(gt, x_i, a_i) over the test rows.
double expected_true_reward(const std::vector<Action>& assignment, const simgen::GroundTruth& gt,
                            const Matrix& test_X);
// Probes every row of X and every adjacent action pair; counts the pairs
// where the prediction decreases.
long monotonicity_violations(const sire::RewardModel& model, const Matrix& X);

enum class Method { kSire, kSireNoHsic, kIre, kIreNoHsic, kCrm };
std::string method_name(Method m);
Method parse_method(const std::string& name);
inline const std::vector<Method> kAllMethods{Method::kSire, Method::kSireNoHsic, Method::kIre,
                                             Method::kIreNoHsic, Method::kCrm};

enum class Solver { kDp, kLagrangian };

struct BenchmarkSpec {
  std::vector<Method> methods = kAllMethods;
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> budgets{3.0};
  std::vector<double> costs{0, 1, 2, 3, 4};
  int n_per_action = 500;
  int n_test = 1000;
  int n_probe = 1000;
  simgen::SimOptions sim;
  sire::SireConfig sire;
  std::vector<double> kappa_grid = sire::kDefaultKappaGrid;
  // Also train on the two-action restriction and report PEHE.
  bool binary_pehe = true;
  crm::CrmConfig crm;
  Solver solver = Solver::kDp;
  int jobs = 1;
  void validate() const;
};

// One row per (method, seed, budget). Metrics that do not apply to a
// method (RMSE and PEHE for CRM) are NaN.
struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  double budget = 0.0;
  double rmse = 0.0;
  double pehe = 0.0;
  double expected_reward = 0.0;
  double avg_cost = 0.0;
  double kappa = 0.0;
  long monotone_violations = 0;
  std::string status = "ok";  // "ok" or "failed: <reason>"
  bool ok() const { return status == "ok"; }
};

struct CellTiming {
  std::string family;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

struct BenchmarkResult {
  std::vector<ResultRow> rows;  // ordered by method, then seed, then budget
  std::vector<CellTiming> timings;

  void write_csv(std::ostream& out) const;
  void write_timings_csv(std::ostream& out) const;
  // Mean and sample std per (method, budget) for every metric.
  nlohmann::json summary() const;
};

// Fully-simulated benchmark: for each seed a fresh ground truth, logged
// data, binary data and test contexts; every model family is one job.
BenchmarkResult run_benchmark(const BenchmarkSpec& spec);

struct NestedBenchmarkSpec {
  std::vector<Method> methods{Method::kSire, Method::kSireNoHsic, Method::kIre,
                              Method::kIreNoHsic};
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> budgets{1.0, 2.0};
  simgen::NestedSimConfig data;
  sire::SireConfig sire;
  std::vector<double> kappa_grid = sire::kDefaultKappaGrid;
  int jobs = 1;
  void validate() const;
};

// Nested-classification benchmark. Labels are reversed before training so
// that action order matches increasing cost (and nondecreasing reward);
// reported assignments are evaluated against the true labels.
BenchmarkResult run_nested_benchmark(const NestedBenchmarkSpec& spec);

// Relabels a -> K + 1 - a and reverses the propensity columns.
BanditDataset reverse_actions(const BanditDataset& data);

}  // namespace incentive::evalbench
