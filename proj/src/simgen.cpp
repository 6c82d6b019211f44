#include "incentive/simgen.hpp"

#include "incentive/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace incentive::simgen {
namespace {

Action sample_categorical(const Vector& probs, Xoshiro256& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cumulative += probs(k);
    if (u < cumulative) return static_cast<Action>(k + 1);
  }
  // u landed in the rounding gap above the last partial sum.
  for (Eigen::Index k = probs.size() - 1; k >= 0; --k) {
    if (probs(k) > 0.0) return static_cast<Action>(k + 1);
  }
  return 1;
}

Vector draw_context(Xoshiro256& rng) {
  Vector x(kFeatureDim);
  // (0, 10]: 1 - U maps [0, 1) onto (0, 1], keeping the ratio policy defined.
  for (int j = 0; j < kFeatureDim; ++j) x(j) = kFeatureUpper * (1.0 - rng.uniform());
  return x;
}

std::vector<Split> assign_train_validation(std::size_t n, double validation_fraction,
                                           Xoshiro256& rng) {
  require(validation_fraction >= 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in [0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(n)));
  std::vector<Split> splits(n, Split::kTrain);
  for (std::size_t i = 0; i < n_val; ++i) splits[order[i]] = Split::kValidation;
  return splits;
}

BanditDataset quota_fill(const GroundTruth& gt, int n_actions, int n_per_action,
                         std::uint64_t seed, const SimOptions& options) {
  require(n_per_action >= 1, "n_per_action must be at least 1");
  auto rng = make_stream(seed, "logged_data");
  auto noise_rng = make_stream(seed, "reward_noise");
  auto split_rng = make_stream(seed, "splits");

  const std::size_t total = static_cast<std::size_t>(n_actions) *
                            static_cast<std::size_t>(n_per_action);
  BanditDataset out;
  out.n_actions = n_actions;
  out.features.resize(static_cast<Eigen::Index>(total), kFeatureDim);
  out.rewards.resize(static_cast<Eigen::Index>(total));
  out.propensities = Matrix(static_cast<Eigen::Index>(total), n_actions);
  out.actions.reserve(total);

  std::vector<int> counts(static_cast<std::size_t>(n_actions), 0);
  Eigen::Index row = 0;
  while (static_cast<std::size_t>(row) < total) {
    const Vector x = draw_context(rng);
    const Vector probs = logging_probs(x, n_actions);
    const Action y = sample_categorical(probs, rng);
    auto& count = counts[static_cast<std::size_t>(y - 1)];
    if (count >= n_per_action) continue;
    ++count;
    const double f = true_reward(gt, x, y);
    double r = f;
    if (options.noise == NoiseModel::kBernoulli) r = noise_rng.uniform() < f ? 1.0 : 0.0;
    out.features.row(row) = x.transpose();
    out.actions.push_back(y);
    out.rewards(row) = r;
    out.propensities->row(row) = probs.transpose();
    ++row;
  }
  out.splits = assign_train_validation(total, options.validation_fraction, split_rng);
  return out;
}

}  // namespace

GroundTruth sample_ground_truth(std::uint64_t seed) {
  auto rng = make_stream(seed, "ground_truth");
  GroundTruth gt;
  gt.a.resize(kNumBumps);
  gt.b.resize(kNumBumps, kFeatureDim);
  gt.c.resize(kNumBumps, kFeatureDim);
  for (int i = 0; i < kNumBumps; ++i) gt.a(i) = rng.uniform();
  for (int i = 0; i < kNumBumps; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) gt.b(i, j) = rng.uniform();
  }
  for (int i = 0; i < kNumBumps; ++i) {
    for (int j = 0; j < kFeatureDim; ++j) gt.c(i, j) = rng.uniform();
  }

  auto calibration = make_stream(seed, "calibration");
  std::vector<double> values(kCalibrationDraws);
  for (auto& v : values) v = h_eval(gt, draw_context(calibration));
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  gt.mu = mean;
  gt.sigma = std::sqrt(ss / n);
  if (!(gt.sigma > 0.0)) throw NumericalError("degenerate calibration: std of h is zero");
  return gt;
}

double h_eval(const GroundTruth& gt, std::span<const double> x) {
  require_dims(static_cast<Eigen::Index>(x.size()) == gt.b.cols(),
               "h_eval expects " + std::to_string(gt.b.cols()) + " features, got " +
                   std::to_string(x.size()));
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < gt.a.size(); ++i) {
    const double exponent =
        -(gt.b.row(i).transpose().array() * (xv - gt.c.row(i).transpose()).array().abs()).sum();
    total += gt.a(i) * std::exp(exponent);
  }
  return total;
}

double h_eval(const GroundTruth& gt, const Vector& x) {
  return h_eval(gt, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double true_reward(const GroundTruth& gt, const Vector& x, Action y) {
  require(y >= 1 && y <= gt.n_actions,
          "action " + std::to_string(y) + " outside {1.." + std::to_string(gt.n_actions) + "}");
  const double standardized = (h_eval(gt, x) - gt.mu) / gt.sigma;
  return sigmoid(standardized + static_cast<double>(y) / kActionScale);
}

Vector true_reward_row(const GroundTruth& gt, const Vector& x) {
  const double standardized = (h_eval(gt, x) - gt.mu) / gt.sigma;
  Vector row(gt.n_actions);
  for (int k = 0; k < gt.n_actions; ++k) {
    row(k) = sigmoid(standardized + static_cast<double>(k + 1) / kActionScale);
  }
  return row;
}

Matrix true_reward_matrix(const GroundTruth& gt, const Matrix& X) {
  Matrix out(X.rows(), gt.n_actions);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = true_reward_row(gt, X.row(i).transpose()).transpose();
  }
  return out;
}

double logging_prob(const Vector& x, Action y, int n_actions) {
  require(y >= 1 && y <= n_actions, "action outside {1..n_actions}");
  return logging_probs(x, n_actions)(y - 1);
}

Vector logging_probs(const Vector& x, int n_actions) {
  require_dims(x.size() >= n_actions, "context shorter than the number of actions");
  const Vector head = x.head(n_actions);
  const double denom = head.sum();
  if (!(denom > 0.0)) throw ValidationError("logging policy denominator is not positive");
  return head / denom;
}

BanditDataset simulate_dataset(const GroundTruth& gt, int n_per_action, std::uint64_t seed,
                               SimOptions options) {
  return quota_fill(gt, kNumActions, n_per_action, seed, options);
}

BanditDataset simulate_binary_dataset(const GroundTruth& gt, int n_per_action,
                                      std::uint64_t seed, SimOptions options) {
  return quota_fill(gt, 2, n_per_action, derive_seed(seed, "binary"), options);
}

Matrix sample_contexts(int n, std::uint64_t seed) {
  require(n >= 1, "need at least one context");
  auto rng = make_stream(seed, "contexts");
  Matrix X(n, kFeatureDim);
  for (int i = 0; i < n; ++i) X.row(i) = draw_context(rng).transpose();
  return X;
}

std::vector<long> logged_action_histogram(long n, std::uint64_t seed, int n_actions) {
  auto rng = make_stream(seed, "logged_data");
  std::vector<long> counts(static_cast<std::size_t>(n_actions), 0);
  for (long i = 0; i < n; ++i) {
    const Vector x = draw_context(rng);
    ++counts[static_cast<std::size_t>(sample_categorical(logging_probs(x, n_actions), rng) - 1)];
  }
  return counts;
}

// ---------------------------------------------------------------------------

void NestedSimConfig::validate() const {
  require(n_classes >= 2, "nested benchmark needs at least two labels");
  require(neg_ratio >= 0.0, "neg_ratio must be nonnegative");
  require(feature_dim >= n_classes, "feature_dim must be at least n_classes");
  require(static_cast<int>(costs.size()) == n_classes, "costs must have one entry per label");
  for (std::size_t k = 1; k < costs.size(); ++k) {
    require(costs[k] < costs[k - 1], "costs must strictly decrease with label specificity");
  }
  require(std::abs(split[0] + split[1] + split[2] - 1.0) <= 1e-12,
          "split fractions must sum to 1");
  for (double s : split) require(s >= 0.0, "split fractions must be nonnegative");
  require(class_separation > 0.0, "class_separation must be positive");
  const int n_pos = static_cast<int>(std::floor(n_samples / (1.0 + neg_ratio)));
  require(n_pos >= 1, "n_samples too small for one positive row");
}

double NestedDataset::reward(std::size_t row, Action label) const {
  const int y_star = true_label.at(row);
  return (y_star > 0 && label <= y_star) ? 1.0 : 0.0;
}

Matrix NestedDataset::reward_matrix(const std::vector<std::size_t>& rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), data.n_actions);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int k = 1; k <= data.n_actions; ++k) {
      out(static_cast<Eigen::Index>(r), k - 1) = reward(rows[r], k);
    }
  }
  return out;
}

Matrix NestedDataset::reward_matrix() const {
  std::vector<std::size_t> rows(true_label.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return reward_matrix(rows);
}

NestedDataset simulate_nested_dataset(const NestedSimConfig& cfg) {
  cfg.validate();
  auto mean_rng = make_stream(cfg.seed, "nested_means");
  auto row_rng = make_stream(cfg.seed, "nested_rows");
  auto log_rng = make_stream(cfg.seed, "nested_logging");
  auto split_rng = make_stream(cfg.seed, "nested_splits");
  std::normal_distribution<double> normal(0.0, 1.0);

  const int d = cfg.feature_dim;
  const int K = cfg.n_classes;
  auto gaussian = [&](Xoshiro256& rng, double scale) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v(j) = scale * normal(rng);
    return v;
  };

  // Class k's mean is a random offset from class k-1's mean, so more
  // specific labels sit inside their parent's neighbourhood.
  std::vector<Vector> class_mean;
  Vector current = gaussian(mean_rng, cfg.class_separation);
  for (int k = 0; k < K; ++k) {
    current = current + gaussian(mean_rng, cfg.class_separation);
    class_mean.push_back(current);
  }
  const Vector negative_mean = gaussian(mean_rng, cfg.class_separation);

  const int n_pos = static_cast<int>(std::floor(cfg.n_samples / (1.0 + cfg.neg_ratio)));
  const int n_neg = static_cast<int>(std::llround(cfg.neg_ratio * n_pos));
  const int n = n_pos + n_neg;

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n_pos; ++i) labels.push_back(1 + i % K);
  for (int i = 0; i < n_neg; ++i) labels.push_back(0);
  std::shuffle(labels.begin(), labels.end(), row_rng);

  NestedDataset out;
  out.costs = cfg.costs;
  out.true_label = labels;
  auto& data = out.data;
  data.n_actions = K;
  data.features.resize(n, d);
  data.rewards.resize(n);
  data.propensities = Matrix(n, K);
  data.actions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y_star = labels[static_cast<std::size_t>(i)];
    const Vector& mean = y_star > 0 ? class_mean[static_cast<std::size_t>(y_star - 1)]
                                    : negative_mean;
    const Vector x = mean + gaussian(row_rng, 1.0);
    data.features.row(i) = x.transpose();

    // Softmax over the first K coordinates.
    Vector logits = x.head(K);
    logits.array() -= logits.maxCoeff();
    Vector probs = logits.array().exp();
    probs /= probs.sum();
    const Action a = sample_categorical(probs, log_rng);
    data.propensities->row(i) = probs.transpose();
    data.actions.push_back(a);
    data.rewards(i) = out.reward(static_cast<std::size_t>(i), a);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(std::floor(cfg.split[0] * n));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.split[1] * n));
  data.splits.assign(static_cast<std::size_t>(n), Split::kTest);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_train) {
      data.splits[order[i]] = Split::kTrain;
    } else if (i < n_train + n_val) {
      data.splits[order[i]] = Split::kValidation;
    }
  }
  return out;
}

}  // namespace incentive::simgen
