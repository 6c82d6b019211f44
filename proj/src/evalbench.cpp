#include "incentive/evalbench.hpp"

#include "incentive/ccpo.hpp"
#include "incentive/io.hpp"
#include "incentive/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

namespace incentive::evalbench {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Family { kSire, kIre, kCrm };

Family family_of(Method m) {
  switch (m) {
    case Method::kSire:
    case Method::kSireNoHsic:
      return Family::kSire;
    case Method::kIre:
    case Method::kIreNoHsic:
      return Family::kIre;
    case Method::kCrm:
      return Family::kCrm;
  }
  return Family::kCrm;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::kSire:
      return "SIRE";
    case Family::kIre:
      return "IRE";
    case Family::kCrm:
      return "CRM";
  }
  return "?";
}

struct Job {
  Family family;
  std::uint64_t seed;
};

// Rows produced by one job, keyed by method.
using JobOutput = std::map<Method, std::vector<ResultRow>>;

std::vector<Family> families_for(const std::vector<Method>& methods) {
  std::vector<Family> out;
  for (Family f : {Family::kSire, Family::kIre, Family::kCrm}) {
    for (Method m : methods) {
      if (family_of(m) == f) {
        out.push_back(f);
        break;
      }
    }
  }
  return out;
}

// Runs fn(i) for i in [0, n) on `jobs` worker threads. Results are stored
// by index, so the caller's ordering never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<ResultRow> failed_rows(Method m, std::uint64_t seed, const std::vector<double>& budgets,
                                   const std::string& reason) {
  std::vector<ResultRow> rows;
  for (double b : budgets) {
    ResultRow r;
    r.method = method_name(m);
    r.seed = seed;
    r.budget = b;
    r.rmse = r.pehe = r.expected_reward = r.avg_cost = r.kappa = kNaN;
    r.monotone_violations = 0;
    r.status = "failed: " + reason;
    rows.push_back(std::move(r));
  }
  return rows;
}

ccpo::PolicySolution solve(const Matrix& F, const ccpo::CostSchedule& sched, Solver solver) {
  return solver == Solver::kDp ? ccpo::dp_policy(F, sched) : ccpo::lagrangian_search(F, sched);
}

std::size_t index_of_zero(const std::vector<double>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0.0) return i;
  }
  return grid.size();
}

// The selected-kappa model and the kappa = 0 model of one grid search. The
// kappa = 0 model comes from the grid when it contains 0 (same seed, so it
// is exactly the unpenalized variant); otherwise it is trained separately.
struct ModelPair {
  sire::KappaSelection selection;
  std::optional<sire::RewardModel> extra;
  std::size_t zero_index = 0;

  const sire::RewardModel& selected() const { return selection.models[selection.best_index]; }
  const sire::RewardModel& unpenalized() const {
    return extra ? *extra : selection.models[zero_index];
  }
  double kappa() const { return selection.best_kappa; }
};

ModelPair fit_pair(const BanditDataset& data, const sire::SireConfig& cfg,
                   const std::vector<double>& grid, bool need_unpenalized) {
  ModelPair p;
  p.selection = sire::select_kappa(data, cfg, grid);
  p.zero_index = index_of_zero(grid);
  if (need_unpenalized && p.zero_index == grid.size()) {
    sire::SireConfig c0 = cfg;
    c0.kappa = 0.0;
    p.extra = sire::train(data, c0);
  }
  return p;
}

struct SeedData {
  simgen::GroundTruth gt;
  BanditDataset logged;
  Matrix test_X;
  Matrix test_truth;
  Matrix probe_X;
};

SeedData make_seed_data(const BenchmarkSpec& spec, std::uint64_t seed) {
  SeedData s;
  s.gt = simgen::sample_ground_truth(derive_seed(seed, "bench_ground_truth"));
  s.logged = simgen::simulate_dataset(s.gt, spec.n_per_action, derive_seed(seed, "bench_logged"),
                                      spec.sim);
  s.test_X = simgen::sample_contexts(spec.n_test, derive_seed(seed, "bench_test"));
  s.test_truth = simgen::true_reward_matrix(s.gt, s.test_X);
  s.probe_X = simgen::sample_contexts(spec.n_probe, derive_seed(seed, "bench_probe"));
  return s;
}

JobOutput run_model_family(const BenchmarkSpec& spec, Family family, std::uint64_t seed) {
  const SeedData sd = make_seed_data(spec, seed);
  const bool structured = family == Family::kSire;
  const Method main = structured ? Method::kSire : Method::kIre;
  const Method ablation = structured ? Method::kSireNoHsic : Method::kIreNoHsic;
  const bool want_main =
      std::find(spec.methods.begin(), spec.methods.end(), main) != spec.methods.end();
  const bool want_ablation =
      std::find(spec.methods.begin(), spec.methods.end(), ablation) != spec.methods.end();

  sire::SireConfig cfg = spec.sire;
  cfg.structured = structured;
  cfg.seed = derive_seed(seed, structured ? "bench_sire" : "bench_ire");

  std::vector<double> grid = spec.kappa_grid;
  if (!want_main) grid = {0.0};
  const ModelPair multi = fit_pair(sd.logged, cfg, grid, want_ablation);

  std::optional<ModelPair> binary;
  if (spec.binary_pehe) {
    const BanditDataset bin = simgen::simulate_binary_dataset(
        sd.gt, spec.n_per_action, derive_seed(seed, "bench_binary"), spec.sim);
    sire::SireConfig bcfg = cfg;
    bcfg.seed = derive_seed(cfg.seed, "binary");
    binary = fit_pair(bin, bcfg, grid, want_ablation);
  }
  const Vector true_ite = sd.test_truth.col(1) - sd.test_truth.col(0);

  auto rows_for = [&](Method method, const sire::RewardModel& model, const sire::RewardModel* bin,
                      double kappa) {
    std::vector<ResultRow> rows;
    const Matrix F = model.predict_all(sd.test_X);
    const double model_rmse = rmse(F, sd.test_truth);
    double model_pehe = kNaN;
    if (bin != nullptr) {
      const Matrix B = bin->predict_all(sd.test_X);
      model_pehe = pehe(B.col(1) - B.col(0), true_ite);
    }
    long violations = 0;
    if (structured) {
      violations = monotonicity_violations(model, sd.probe_X);
      if (bin != nullptr) violations += monotonicity_violations(*bin, sd.probe_X);
    }
    for (double budget : spec.budgets) {
      ResultRow r;
      r.method = method_name(method);
      r.seed = seed;
      r.budget = budget;
      r.rmse = model_rmse;
      r.pehe = model_pehe;
      r.kappa = kappa;
      r.monotone_violations = violations;
      const auto sol = solve(F, {spec.costs, budget}, spec.solver);
      r.expected_reward = expected_true_reward(sol.assignment, sd.gt, sd.test_X);
      r.avg_cost = sol.avg_cost;
      rows.push_back(std::move(r));
    }
    return rows;
  };

  JobOutput out;
  if (want_main) {
    out[main] = rows_for(main, multi.selected(), binary ? &binary->selected() : nullptr,
                         multi.kappa());
  }
  if (want_ablation) {
    out[ablation] =
        rows_for(ablation, multi.unpenalized(), binary ? &binary->unpenalized() : nullptr, 0.0);
  }
  return out;
}

JobOutput run_crm(const BenchmarkSpec& spec, std::uint64_t seed) {
  const SeedData sd = make_seed_data(spec, seed);
  crm::CrmConfig cfg = spec.crm;
  cfg.seed = derive_seed(seed, "bench_crm");
  const auto grid = crm::default_lambda_grid(sd.logged);
  JobOutput out;
  auto& rows = out[Method::kCrm];
  for (double budget : spec.budgets) {
    const auto res = crm::run_banditnet_baseline(sd.logged, {spec.costs, budget}, grid, cfg);
    const auto assignment = res.policy.assign(sd.test_X);
    ResultRow r;
    r.method = method_name(Method::kCrm);
    r.seed = seed;
    r.budget = budget;
    r.rmse = r.pehe = r.kappa = kNaN;
    r.expected_reward = expected_true_reward(assignment, sd.gt, sd.test_X);
    r.avg_cost = ccpo::average_cost(assignment, spec.costs);
    rows.push_back(std::move(r));
  }
  return out;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// Executes every (family, seed) job and assembles rows in method, seed,
// budget order.
BenchmarkResult execute(const std::vector<Method>& methods, const std::vector<std::uint64_t>& seeds,
                        const std::vector<double>& budgets, int jobs,
                        const std::function<JobOutput(Family, std::uint64_t)>& run) {
  std::vector<Job> work;
  for (Family f : families_for(methods)) {
    for (std::uint64_t s : seeds) work.push_back({f, s});
  }
  std::vector<JobOutput> outputs(work.size());
  std::vector<double> times(work.size(), 0.0);
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const Job& job = work[i];
    try {
      outputs[i] = run(job.family, job.seed);
    } catch (const std::exception& e) {
      spdlog::warn("{} seed {} failed: {}", family_name(job.family), job.seed, e.what());
      for (Method m : methods) {
        if (family_of(m) == job.family) outputs[i][m] = failed_rows(m, job.seed, budgets, e.what());
      }
    }
    times[i] = elapsed(start);
    spdlog::info("{} seed {} done in {:.1f}s", family_name(job.family), job.seed, times[i]);
  });

  BenchmarkResult result;
  for (std::size_t i = 0; i < work.size(); ++i) {
    result.timings.push_back({family_name(work[i].family), work[i].seed, times[i]});
  }
  for (Method m : methods) {
    for (std::uint64_t s : seeds) {
      for (std::size_t i = 0; i < work.size(); ++i) {
        if (work[i].family != family_of(m) || work[i].seed != s) continue;
        const auto& rows = outputs[i].at(m);
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
      }
    }
  }
  return result;
}

void check_methods(const std::vector<Method>& methods) {
  require(!methods.empty(), "methods must not be empty");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) require(methods[i] != methods[j], "duplicate method");
  }
}

void check_seeds(const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), "seeds must not be empty");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) require(seeds[i] != seeds[j], "duplicate seed");
  }
}

}  // namespace

double pehe(const Vector& est_ite, const Vector& true_ite) {
  require_dims(est_ite.size() == true_ite.size(), "PEHE inputs differ in length");
  require(est_ite.size() >= 1, "PEHE needs at least one individual");
  return std::sqrt((est_ite - true_ite).squaredNorm() / static_cast<double>(est_ite.size()));
}

double rmse(const Matrix& est, const Matrix& truth) {
  require_dims(est.rows() == truth.rows() && est.cols() == truth.cols(),
               "RMSE inputs differ in shape");
  require(est.size() >= 1, "RMSE needs at least one entry");
  return std::sqrt((est - truth).squaredNorm() / static_cast<double>(est.size()));
}

double rmse_reward(const sire::RewardModel& model, const simgen::GroundTruth& gt,
                   const Matrix& test_X) {
  require(test_X.rows() >= 1, "test set is empty");
  return rmse(model.predict_all(test_X), simgen::true_reward_matrix(gt, test_X));
}

double expected_true_reward(const std::vector<Action>& assignment, const simgen::GroundTruth& gt,
                            const Matrix& test_X) {
  require_dims(static_cast<Eigen::Index>(assignment.size()) == test_X.rows(),
               "assignment length differs from the number of test rows");
  require(!assignment.empty(), "test set is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += simgen::true_reward(gt, test_X.row(static_cast<Eigen::Index>(i)).transpose(),
                                 assignment[i]);
  }
  return total / static_cast<double>(assignment.size());
}

long monotonicity_violations(const sire::RewardModel& model, const Matrix& X) {
  const Matrix P = model.predict_all(X);
  long count = 0;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index k = 1; k < P.cols(); ++k) {
      if (P(i, k) < P(i, k - 1)) ++count;
    }
  }
  return count;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kSire:
      return "CCPOvSIRE";
    case Method::kSireNoHsic:
      return "CCPOvSIRE_kappa0";
    case Method::kIre:
      return "CCPOvIRE";
    case Method::kIreNoHsic:
      return "CCPOvIRE_kappa0";
    case Method::kCrm:
      return "CRM";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  throw ValidationError("unknown method '" + name + "'");
}

void BenchmarkSpec::validate() const {
  check_methods(methods);
  check_seeds(seeds);
  require(!budgets.empty(), "budgets must not be empty");
  ccpo::CostSchedule{costs, 0.0}.validate();
  require(static_cast<int>(costs.size()) == simgen::kNumActions,
          "costs must list one value per action (5)");
  for (double b : budgets) ccpo::CostSchedule{costs, b}.validate();
  require(n_per_action >= 1, "n_per_action must be positive");
  require(n_test >= 1, "n_test must be positive");
  require(n_probe >= 1, "n_probe must be positive");
  require(!kappa_grid.empty(), "kappa_grid must not be empty");
  for (double k : kappa_grid) require(k >= 0.0 && std::isfinite(k), "kappa values must be >= 0");
  require(jobs >= 1, "jobs must be at least 1");
  sire.validate();
  crm.validate();
}

void NestedBenchmarkSpec::validate() const {
  check_methods(methods);
  check_seeds(seeds);
  for (Method m : methods) require(m != Method::kCrm, "CRM is not part of the nested benchmark");
  require(!budgets.empty(), "budgets must not be empty");
  for (double b : budgets) require(b >= 0.0 && std::isfinite(b), "budgets must be >= 0");
  require(!kappa_grid.empty(), "kappa_grid must not be empty");
  require(jobs >= 1, "jobs must be at least 1");
  data.validate();
  sire.validate();
}

BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  return execute(spec.methods, spec.seeds, spec.budgets, spec.jobs,
                 [&](Family f, std::uint64_t seed) {
                   return f == Family::kCrm ? run_crm(spec, seed)
                                            : run_model_family(spec, f, seed);
                 });
}

BanditDataset reverse_actions(const BanditDataset& data) {
  BanditDataset out = data;
  const int K = data.n_actions;
  for (auto& a : out.actions) a = K + 1 - a;
  if (data.propensities) out.propensities = data.propensities->rowwise().reverse();
  return out;
}

BenchmarkResult run_nested_benchmark(const NestedBenchmarkSpec& spec) {
  spec.validate();
  auto run = [&](Family family, std::uint64_t seed) {
    simgen::NestedSimConfig dcfg = spec.data;
    dcfg.seed = derive_seed(seed, "nested_data");
    const simgen::NestedDataset nd = simgen::simulate_nested_dataset(dcfg);
    const BanditDataset data = reverse_actions(nd.data);
    std::vector<double> costs(nd.costs.rbegin(), nd.costs.rend());
    const auto test_rows = data.indices(Split::kTest);
    require(!test_rows.empty(), "nested benchmark has no test rows");
    const BanditDataset test = data.subset(test_rows);
    const Matrix truth = nd.reward_matrix(test_rows).rowwise().reverse();

    const bool structured = family == Family::kSire;
    const Method main = structured ? Method::kSire : Method::kIre;
    const Method ablation = structured ? Method::kSireNoHsic : Method::kIreNoHsic;
    const bool want_main =
        std::find(spec.methods.begin(), spec.methods.end(), main) != spec.methods.end();
    const bool want_ablation =
        std::find(spec.methods.begin(), spec.methods.end(), ablation) != spec.methods.end();
    sire::SireConfig cfg = spec.sire;
    cfg.structured = structured;
    cfg.seed = derive_seed(seed, structured ? "nested_sire" : "nested_ire");
    std::vector<double> grid = spec.kappa_grid;
    if (!want_main) grid = {0.0};
    const ModelPair pair = fit_pair(data, cfg, grid, want_ablation);

    auto rows_for = [&](Method method, const sire::RewardModel& model, double kappa) {
      std::vector<ResultRow> rows;
      const Matrix F = model.predict_all(test.features);
      const double model_rmse = rmse(F, truth);
      const long violations = structured ? monotonicity_violations(model, test.features) : 0;
      for (double budget : spec.budgets) {
        ResultRow r;
        r.method = method_name(method);
        r.seed = seed;
        r.budget = budget;
        r.rmse = model_rmse;
        r.pehe = kNaN;
        r.kappa = kappa;
        r.monotone_violations = violations;
        const auto sol = ccpo::dp_policy(F, {costs, budget});
        double total = 0.0;
        for (std::size_t i = 0; i < sol.assignment.size(); ++i) {
          total += truth(static_cast<Eigen::Index>(i), sol.assignment[i] - 1);
        }
        r.expected_reward = total / static_cast<double>(sol.assignment.size());
        r.avg_cost = sol.avg_cost;
        rows.push_back(std::move(r));
      }
      return rows;
    };
    JobOutput out;
    if (want_main) out[main] = rows_for(main, pair.selected(), pair.kappa());
    if (want_ablation) out[ablation] = rows_for(ablation, pair.unpenalized(), 0.0);
    return out;
  };
  return execute(spec.methods, spec.seeds, spec.budgets, spec.jobs, run);
}

void BenchmarkResult::write_csv(std::ostream& out) const {
  out << "method,seed,budget,rmse,pehe,expected_reward,avg_cost,kappa,monotone_violations,status\n";
  for (const auto& r : rows) {
    out << io::csv_escape(r.method) << ',' << r.seed << ',' << io::format_real(r.budget) << ','
        << io::format_real(r.rmse) << ',' << io::format_real(r.pehe) << ','
        << io::format_real(r.expected_reward) << ',' << io::format_real(r.avg_cost) << ','
        << io::format_real(r.kappa) << ',' << r.monotone_violations << ','
        << io::csv_escape(r.status) << '\n';
  }
}

void BenchmarkResult::write_timings_csv(std::ostream& out) const {
  out << "family,seed,wall_time\n";
  for (const auto& t : timings) {
    out << t.family << ',' << t.seed << ',' << io::format_real(t.wall_time) << '\n';
  }
}

nlohmann::json BenchmarkResult::summary() const {
  struct Acc {
    std::vector<double> rmse, pehe, reward, cost;
    long failed = 0;
    long kappa_positive = 0;
    long violations = 0;
  };
  std::vector<std::pair<std::string, double>> keys;
  std::map<std::pair<std::string, double>, Acc> acc;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.method, r.budget);
    if (acc.find(key) == acc.end()) keys.push_back(key);
    Acc& a = acc[key];
    if (!r.ok()) {
      ++a.failed;
      continue;
    }
    if (std::isfinite(r.rmse)) a.rmse.push_back(r.rmse);
    if (std::isfinite(r.pehe)) a.pehe.push_back(r.pehe);
    a.reward.push_back(r.expected_reward);
    a.cost.push_back(r.avg_cost);
    if (r.kappa > 0.0) ++a.kappa_positive;
    a.violations += r.monotone_violations;
  }
  auto stats = [](const std::vector<double>& v) -> nlohmann::json {
    if (v.empty()) return nullptr;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {{"mean", mean}, {"std", sd}, {"n", v.size()}};
  };
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& key : keys) {
    const Acc& a = acc.at(key);
    cells.push_back({{"method", key.first},
                     {"budget", key.second},
                     {"completed", a.reward.size()},
                     {"failed", a.failed},
                     {"rmse", stats(a.rmse)},
                     {"pehe", stats(a.pehe)},
                     {"expected_reward", stats(a.reward)},
                     {"avg_cost", stats(a.cost)},
                     {"kappa_positive", a.kappa_positive},
                     {"monotone_violations", a.violations}});
  }
  return {{"format", "incentive.bench_summary.v1"}, {"cells", cells}};
}

}  // namespace incentive::evalbench
