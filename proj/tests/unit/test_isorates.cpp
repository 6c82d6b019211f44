#include "incentive/isorates.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace incentive;
using namespace incentive::isorates;

namespace {

bool nondecreasing(const std::vector<double>& v) {
  return std::is_sorted(v.begin(), v.end());
}

// Every nondecreasing vector on a grid with the given spacing, recursively.
void grid_search(const std::vector<double>& y, const std::vector<double>& w, double lo, double hi,
                 double step, std::vector<double>& current, double& best) {
  if (current.size() == y.size()) {
    best = std::min(best, weighted_sse(current, y, w));
    return;
  }
  const double start = current.empty() ? lo : current.back();
  for (double v = start; v <= hi + 1e-12; v += step) {
    current.push_back(v);
    grid_search(y, w, lo, hi, step, current, best);
    current.pop_back();
  }
}

}  // namespace

TEST(Pava, AlreadySortedUnchanged) {
  const std::vector<double> y{0.1, 0.2, 0.2, 0.7};
  EXPECT_EQ(pava(y, {1, 2, 3, 4}), y);
}

TEST(Pava, PoolsViolators) {
  const std::vector<double> y{3, 1, 2};
  const std::vector<double> w{1, 1, 1};
  const auto fit = pava(y, w);
  for (double v : fit) EXPECT_DOUBLE_EQ(v, 2.0);
  EXPECT_DOUBLE_EQ(weighted_sse(fit, y, w), 2.0);
  // Every pooling of three points: none beats the full pool.
  const std::vector<std::vector<double>> poolings{{3, 1.5, 1.5}, {2, 2, 2}, {3, 1, 2}};
  for (const auto& p : poolings) {
    if (nondecreasing(p)) {
      EXPECT_LE(weighted_sse(fit, y, w), weighted_sse(p, y, w));
    }
  }
}

TEST(Pava, WeightedMerge) {
  const auto fit = pava({1.0, 0.0}, {3.0, 1.0});
  EXPECT_DOUBLE_EQ(fit[0], 0.75);
  EXPECT_DOUBLE_EQ(fit[1], 0.75);
  EXPECT_THROW(pava({1.0, 0.0}, {1.0, 0.0}), ValidationError);
  EXPECT_THROW(pava({1.0, 0.0}, {1.0}), DimensionError);
}

TEST(Pava, BeatsMonotoneGrid) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> y(5), w(5);
    for (auto& v : y) v = u(rng);
    for (auto& v : w) v = 0.5 + u(rng);
    const auto fit = pava(y, w);
    // 0.01-spaced grid restricted to the data range (the projection lies inside it).
    const double lo = std::floor(*std::min_element(y.begin(), y.end()) * 100) / 100;
    const double hi = std::ceil(*std::max_element(y.begin(), y.end()) * 100) / 100;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> current;
    grid_search(y, w, lo, hi, trial == 0 ? 0.01 : 0.02, current, best);
    EXPECT_LE(weighted_sse(fit, y, w), best + 1e-12);
  }
}

TEST(Pava, BeatsRandomMonotonePerturbations) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int trial = 0; trial < 500; ++trial) {
    const int K = 2 + static_cast<int>(u(rng) * 10);
    std::vector<double> y(static_cast<std::size_t>(K)), w(static_cast<std::size_t>(K));
    for (auto& v : y) v = u(rng);
    for (auto& v : w) v = 0.1 + u(rng);
    const auto fit = pava(y, w);
    ASSERT_TRUE(nondecreasing(fit));
    const double obj = weighted_sse(fit, y, w);
    for (int p = 0; p < 1000; ++p) {
      std::vector<double> other = fit;
      for (auto& v : other) v += g(rng);
      std::sort(other.begin(), other.end());
      ASSERT_LE(obj, weighted_sse(other, y, w) + 1e-12);
    }
  }
}

TEST(LsFits, ConstantClass) {
  const Matrix C = Matrix::Constant(4, 3, 0.3);
  for (double v : ls_constant_fit(C)) EXPECT_DOUBLE_EQ(v, 0.3);
  const auto two = ls_constant_fit(Matrix{{0, 1}, {1, 0}});
  EXPECT_DOUBLE_EQ(two[0], 0.5);
  EXPECT_DOUBLE_EQ(two[1], 0.5);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix R(7, 4);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = g(rng);
  const auto fit = ls_constant_fit(R);
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += R(i, k);
    EXPECT_NEAR(fit[static_cast<std::size_t>(k)], s / 7.0, 1e-12);
  }
}

TEST(LsFits, MonotoneClass) {
  Matrix R(10, 2);
  R.col(0).setConstant(0.9);
  R.col(1).setConstant(0.1);
  const auto fit = ls_monotone_fit(R);
  EXPECT_NEAR(fit[0], 0.5, 1e-15);
  EXPECT_NEAR(fit[1], 0.5, 1e-15);

  Matrix S(5, 3);
  S << 0, 1, 2, 0.1, 1.1, 2.1, 0, 1, 2, -0.1, 0.9, 1.9, 0, 1, 2;
  EXPECT_EQ(ls_monotone_fit(S), ls_constant_fit(S));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix T(6, 9);
  for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = g(rng);
  EXPECT_TRUE(nondecreasing(ls_monotone_fit(T)));
}

TEST(RateExperiment, NoiselessIsExact) {
  RateConfig cfg;
  cfg.sigma = 0.0;
  cfg.trials = 5;
  cfg.seed = 1;
  const auto table = rate_experiment(cfg);
  ASSERT_EQ(table.rows.size(), 4u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.mean_error_constant, 0.0);
    EXPECT_EQ(row.mean_error_monotone, 0.0);
  }
}

TEST(RateExperiment, SeparationAndCsv) {
  RateConfig cfg;
  cfg.seed = 2;
  const auto table = rate_experiment(cfg);
  ASSERT_EQ(table.rows.size(), 4u);
  const double target = cfg.sigma * cfg.sigma / cfg.n;
  for (const auto& row : table.rows) {
    EXPECT_NEAR(row.mean_error_constant, target, 0.25 * target) << "K=" << row.K;
    EXPECT_LE(row.mean_error_monotone, row.mean_error_constant);
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    EXPECT_LT(table.rows[i].mean_error_monotone, table.rows[i - 1].mean_error_monotone);
  }
  EXPECT_LT(table.rows.back().mean_error_monotone / table.rows.back().mean_error_constant, 0.5);

  std::ostringstream out;
  table.write_csv(out);
  const std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "K,n,sigma,trials,mean_error_constant,mean_error_monotone,std_error_constant,std_error_monotone");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(rate_experiment(cfg).rows.back().mean_error_monotone, table.rows.back().mean_error_monotone);
}

TEST(RateExperiment, RejectsBadConfig) {
  RateConfig cfg;
  cfg.K_grid = {};
  EXPECT_THROW(rate_experiment(cfg), ValidationError);
  cfg = {};
  cfg.n = 0;
  EXPECT_THROW(rate_experiment(cfg), ValidationError);
}
