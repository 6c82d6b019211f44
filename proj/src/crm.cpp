#include "incentive/crm.hpp"

#include "incentive/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

namespace incentive::crm {
namespace {

Matrix one_hot(const std::vector<Action>& actions, int K) {
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), K);
  for (std::size_t i = 0; i < actions.size(); ++i) Y(static_cast<Eigen::Index>(i), actions[i] - 1) = 1.0;
  return Y;
}

Matrix gather(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// Logged-action entries of a probability matrix.
Vector logged_entries(const Matrix& P, const std::vector<Action>& actions) {
  Vector out(P.rows());
  for (Eigen::Index i = 0; i < P.rows(); ++i) out(i) = P(i, actions[static_cast<std::size_t>(i)] - 1);
  return out;
}

struct Fit {
  LinearSoftmaxPolicy policy;
  double avg_cost = 0.0;
  std::vector<Action> assignment;
};

}  // namespace

InputScaling InputScaling::fit(const Matrix& X) {
  require(X.rows() >= 1, "cannot fit input scaling on zero rows");
  InputScaling s;
  s.mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - s.mean.transpose();
  s.scale = (centered.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  }
  return s;
}

InputScaling InputScaling::identity(Eigen::Index dim) {
  return {Vector::Zero(dim), Vector::Ones(dim)};
}

Matrix InputScaling::augment(const Matrix& X) const {
  require_dims(X.cols() == mean.size(), "feature width " + std::to_string(X.cols()) +
                                            " differs from the fitted width " +
                                            std::to_string(mean.size()));
  Matrix out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) =
      ((X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
  out.col(X.cols()).setOnes();
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  const Vector sums = out.rowwise().sum();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= sums(i);
  return out;
}

void PropensityConfig::validate() const {
  require(iterations >= 0, "propensity iterations must be nonnegative");
  require(learning_rate > 0.0, "propensity learning_rate must be positive");
  require(l2 >= 0.0, "propensity l2 must be nonnegative");
  require(clip_epsilon > 0.0 && clip_epsilon < 0.5, "clip_epsilon must lie in (0, 0.5)");
}

Matrix PropensityModel::predict(const Matrix& X) const {
  return softmax_rows(scaling.augment(X) * weights.transpose());
}

Matrix PropensityModel::predict_clipped(const Matrix& X) const {
  return predict(X).cwiseMax(clip_epsilon);
}

PropensityModel fit_propensity(const BanditDataset& data, const PropensityConfig& cfg) {
  cfg.validate();
  const int K = data.n_actions;
  require(K >= 1 && data.size() >= 1, "fit_propensity needs a nonempty dataset");
  std::vector<long> counts(static_cast<std::size_t>(K), 0);
  for (Action a : data.actions) ++counts[static_cast<std::size_t>(a - 1)];
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw ValidationError("action " + std::to_string(k + 1) + " never appears in the logged data");
    }
  }

  PropensityModel model;
  model.clip_epsilon = cfg.clip_epsilon;
  model.scaling = InputScaling::fit(data.features);
  const Matrix Xa = model.scaling.augment(data.features);
  const Matrix Y = one_hot(data.actions, K);
  const double inv_n = 1.0 / static_cast<double>(Xa.rows());
  model.weights = Matrix::Zero(K, Xa.cols());
  const Eigen::Index d = Xa.cols() - 1;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Matrix P = softmax_rows(Xa * model.weights.transpose());
    Matrix grad = (P - Y).transpose() * Xa * inv_n;
    grad.leftCols(d) += cfg.l2 * model.weights.leftCols(d);
    model.weights -= cfg.learning_rate * grad;
  }
  if (!model.weights.allFinite()) throw NumericalError("propensity fit diverged");
  return model;
}

Matrix LinearSoftmaxPolicy::probabilities(const Matrix& X) const {
  return softmax_rows(scaling.augment(X) * theta.transpose());
}

std::vector<Action> LinearSoftmaxPolicy::assign(const Matrix& X) const {
  const Matrix logits = scaling.augment(X) * theta.transpose();
  std::vector<Action> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<Action>(best + 1);
  }
  return out;
}

ObjectiveValue crm_objective_grad(const LinearSoftmaxPolicy& policy, const Matrix& X,
                                  const std::vector<Action>& actions, const Vector& rewards,
                                  const Vector& rho_logged, const std::vector<double>& costs,
                                  double lambda, double eta) {
  const Eigen::Index n = X.rows();
  const int K = policy.n_actions();
  require(n >= 1, "objective needs at least one row");
  require_dims(static_cast<Eigen::Index>(actions.size()) == n && rewards.size() == n &&
                   rho_logged.size() == n,
               "rows, actions, rewards and propensities must have equal lengths");
  require_dims(static_cast<int>(costs.size()) == K, "one cost per action required");

  const Matrix Xa = policy.scaling.augment(X);
  const Matrix P = softmax_rows(Xa * policy.theta.transpose());
  const Eigen::Map<const Vector> c(costs.data(), K);
  const Vector mean_cost = P * c;
  const double inv_n = 1.0 / static_cast<double>(n);

  ObjectiveValue out;
  Matrix G(n, K);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = actions[static_cast<std::size_t>(i)] - 1;
    const double w = (rewards(i) - lambda) / rho_logged(i);
    const double p = P(i, y);
    total += w * p - eta * mean_cost(i);
    for (int k = 0; k < K; ++k) {
      const double d_is = w * p * ((k == y ? 1.0 : 0.0) - P(i, k));
      const double d_cost = -eta * P(i, k) * (costs[static_cast<std::size_t>(k)] - mean_cost(i));
      G(i, k) = (d_is + d_cost) * inv_n;
    }
  }
  out.value = total * inv_n;
  out.grad = G.transpose() * Xa;
  return out;
}

void CrmConfig::validate() const {
  require(epochs >= 0, "crm epochs must be nonnegative");
  require(learning_rate > 0.0, "crm learning_rate must be positive");
  require(batch_size >= 1, "crm batch_size must be at least 1");
  require(eta_steps >= 0, "eta_steps must be nonnegative");
  require(eta_initial > 0.0, "eta_initial must be positive");
  require(eta_doublings >= 0, "eta_doublings must be nonnegative");
  propensity.validate();
}

std::vector<double> default_lambda_grid(const BanditDataset& data, int count) {
  require(count >= 1, "lambda grid needs at least one value");
  require(data.size() >= 1, "empty dataset");
  const double top = data.rewards.maxCoeff();
  std::vector<double> grid;
  for (int j = 0; j < count; ++j) {
    grid.push_back(count == 1 ? 0.0 : top * static_cast<double>(j) / static_cast<double>(count - 1));
  }
  return grid;
}

CrmResult run_banditnet_baseline(const BanditDataset& data, const ccpo::CostSchedule& sched,
                                 const std::vector<double>& lambda_grid, const CrmConfig& cfg) {
  cfg.validate();
  sched.validate();
  require(!lambda_grid.empty(), "lambda grid is empty");
  require(sched.n_actions() == data.n_actions, "cost schedule and dataset disagree on K");
  auto rows = data.indices(Split::kTrain);
  require(!rows.empty(), "dataset has no train split");
  const BanditDataset train = data.subset(rows);

  CrmResult result;
  result.propensity = fit_propensity(train, cfg.propensity);
  const Vector rho = logged_entries(result.propensity.predict_clipped(train.features), train.actions);
  const InputScaling scaling = InputScaling::fit(train.features);
  const Matrix& X = train.features;
  const auto n = static_cast<std::size_t>(X.rows());
  const int K = data.n_actions;
  const double m = sched.budget_per_customer;
  const double slack = 1e-12 * std::max(1.0, m);

  // One SGD run from theta = 0. Every run replays the same minibatch order.
  auto fit = [&](double lambda, double eta) {
    LinearSoftmaxPolicy policy{Matrix::Zero(K, X.cols() + 1), scaling};
    auto rng = make_stream(cfg.seed, "crm_sgd");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> idx;
    std::vector<Action> acts;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(n, start + batch);
        idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(stop));
        acts.clear();
        Vector r(static_cast<Eigen::Index>(idx.size())), p(r.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          acts.push_back(train.actions[idx[i]]);
          r(static_cast<Eigen::Index>(i)) = train.rewards(static_cast<Eigen::Index>(idx[i]));
          p(static_cast<Eigen::Index>(i)) = rho(static_cast<Eigen::Index>(idx[i]));
        }
        const auto obj = crm_objective_grad(policy, gather(X, idx), acts, r, p, sched.costs,
                                            lambda, eta);
        policy.theta += cfg.learning_rate * obj.grad;
      }
    }
    if (!policy.theta.allFinite()) throw NumericalError("CRM policy training diverged");
    Fit f;
    f.assignment = policy.assign(X);
    f.avg_cost = ccpo::average_cost(f.assignment, sched.costs);
    f.policy = std::move(policy);
    return f;
  };

  std::vector<Fit> chosen(lambda_grid.size());
  for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
    const double lambda = lambda_grid[j];
    LambdaDiagnostic diag;
    diag.lambda = lambda;
    std::map<double, double> trajectory;  // eta -> cost
    std::optional<Fit> best;
    double best_eta = 0.0;
    auto consider = [&](double eta, Fit f) {
      trajectory[eta] = f.avg_cost;
      const bool ok = f.avg_cost <= m + slack;
      if (ok && (!best || f.avg_cost > best->avg_cost ||
                 (f.avg_cost == best->avg_cost && eta < best_eta))) {
        best_eta = eta;
        best = std::move(f);
      }
      return ok;
    };

    if (!consider(0.0, fit(lambda, 0.0))) {
      double lo = 0.0;
      double hi = cfg.eta_initial;
      bool found = false;
      for (int t = 0; t <= cfg.eta_doublings; ++t) {
        if (consider(hi, fit(lambda, hi))) {
          found = true;
          break;
        }
        lo = hi;
        hi *= 2.0;
      }
      if (found) {
        for (int t = 0; t < cfg.eta_steps; ++t) {
          const double mid = 0.5 * (lo + hi);
          if (consider(mid, fit(lambda, mid))) {
            hi = mid;
          } else {
            lo = mid;
          }
        }
      }
    }
    double prev_cost = -1.0;
    for (const auto& [eta, cost] : trajectory) {
      if (prev_cost >= 0.0 && cost > prev_cost + 1e-12) ++diag.cost_monotonicity_violations;
      prev_cost = cost;
    }

    if (best) {
      const Matrix P = best->policy.probabilities(X);
      const Vector ratio = logged_entries(P, train.actions).cwiseQuotient(rho);
      diag.feasible = true;
      diag.eta = best_eta;
      diag.avg_cost = best->avg_cost;
      diag.s = ratio.mean();
      diag.snips = ratio.cwiseProduct(train.rewards).mean() / diag.s;
      chosen[j] = std::move(*best);
    }
    result.diagnostics.push_back(diag);
  }

  bool any = false;
  for (std::size_t j = 0; j < result.diagnostics.size(); ++j) {
    const auto& d = result.diagnostics[j];
    if (!d.feasible) continue;
    if (!any || d.snips > result.diagnostics[result.selected].snips) result.selected = j;
    any = true;
  }
  if (!any) throw InfeasibleError("no lambda in the grid admits a policy within budget");

  double s_lo = 0.0, s_hi = 0.0;
  bool first = true;
  for (const auto& d : result.diagnostics) {
    if (!d.feasible) continue;
    s_lo = first ? d.s : std::min(s_lo, d.s);
    s_hi = first ? d.s : std::max(s_hi, d.s);
    first = false;
  }
  spdlog::debug("crm: S range [{}, {}] across {} lambdas", s_lo, s_hi, lambda_grid.size());

  const auto& sel = result.diagnostics[result.selected];
  Fit& winner = chosen[result.selected];
  result.solution.assignment = winner.assignment;
  result.solution.avg_cost = winner.avg_cost;
  result.solution.lambda_star = sel.eta;
  result.solution.est_reward = sel.snips;
  result.policy = std::move(winner.policy);
  return result;
}

}  // namespace incentive::crm
