#pragma once

// Reference implementations shared by the unit tests and the acceptance
// runner. Everything here is written the slow, obvious way on purpose.

#include "incentive/ccpo.hpp"
#include "incentive/crm.hpp"
#include "incentive/kernels.hpp"
#include "incentive/rng.hpp"
#include "incentive/sire.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracles {

using incentive::Action;
using incentive::Matrix;
using incentive::Vector;

// Four-index form of the biased HSIC V-statistic:
//   (1/n^4) sum_{i,j,q,r} K_ij (L_ij + L_qr - 2 L_iq)
inline double hsic_four_index(const Matrix& K, const Matrix& L) {
  const Eigen::Index n = K.rows();
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const long double k = K(i, j);
      for (Eigen::Index q = 0; q < n; ++q) {
        for (Eigen::Index r = 0; r < n; ++r) {
          total += k * (L(i, j) + L(q, r) - 2.0L * L(i, q));
        }
      }
    }
  }
  const long double nn = static_cast<long double>(n);
  return static_cast<double>(total / (nn * nn * nn * nn));
}

// Per-pair kernel evaluation.
inline Matrix gram_loop(const incentive::kernels::KernelSpec& kernel, const Matrix& rows, double gamma) {
  const Eigen::Index n = rows.rows();
  Matrix G(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        if (kernel.kind == incentive::kernels::KernelKind::kLinear) {
          acc += rows(i, c) * rows(j, c);
        } else {
          const double d = rows(i, c) - rows(j, c);
          acc += d * d;
        }
      }
      G(i, j) = kernel.kind == incentive::kernels::KernelKind::kLinear ? acc : std::exp(-gamma * acc);
    }
  }
  return G;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = u(rng);
  }
  return M;
}

// max |a - b| / max(max |b|, floor) over one tensor.
inline double relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-10) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), floor);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

// Worst per-tensor relative error between loss_and_grad and central
// differences of the loss.
inline double sire_gradient_error(const incentive::sire::RewardModel& model, const Matrix& X,
                                  const std::vector<Action>& actions, const Vector& rewards,
                                  const incentive::sire::SireConfig& cfg, double step = 1e-5) {
  using namespace incentive::sire;
  const auto analytic = loss_and_grad(model, X, actions, rewards, cfg);
  RewardModel probe = model;
  double worst = 0.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto perturbed_loss = [&](bool bias, Eigen::Index idx, double delta) {
      probe = model;
      if (bias) {
        probe.layers[l].bias(idx) += delta;
      } else {
        probe.layers[l].weight.data()[idx] += delta;
      }
      return loss_and_grad(probe, X, actions, rewards, cfg).loss;
    };
    const auto& layer = model.layers[l];
    Matrix fd_w(layer.weight.rows(), layer.weight.cols());
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      fd_w.data()[i] = (perturbed_loss(false, i, step) - perturbed_loss(false, i, -step)) / (2 * step);
    }
    Matrix fd_b(layer.bias.size(), 1);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      fd_b(i, 0) = (perturbed_loss(true, i, step) - perturbed_loss(true, i, -step)) / (2 * step);
    }
    worst = std::max(worst, relative_error(analytic.grad[l].weight, fd_w));
    worst = std::max(worst, relative_error(Matrix(analytic.grad[l].bias), fd_b));
  }
  return worst;
}

inline double crm_gradient_error(const incentive::crm::LinearSoftmaxPolicy& policy, const Matrix& X,
                                 const std::vector<Action>& actions, const Vector& rewards,
                                 const Vector& rho, const std::vector<double>& costs, double lambda,
                                 double eta, double step = 1e-6) {
  using namespace incentive::crm;
  const auto analytic = crm_objective_grad(policy, X, actions, rewards, rho, costs, lambda, eta);
  Matrix fd(policy.theta.rows(), policy.theta.cols());
  LinearSoftmaxPolicy probe = policy;
  for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
    probe.theta = policy.theta;
    probe.theta.data()[i] += step;
    const double up = crm_objective_grad(probe, X, actions, rewards, rho, costs, lambda, eta).value;
    probe.theta = policy.theta;
    probe.theta.data()[i] -= step;
    const double down = crm_objective_grad(probe, X, actions, rewards, rho, costs, lambda, eta).value;
    fd.data()[i] = (up - down) / (2 * step);
  }
  return relative_error(analytic.grad, fd);
}

struct SmallAllocation {
  Matrix F;
  std::vector<int> costs;
  long budget = 0;
};

// n <= 6, K <= 5, M <= 8. Costs are sorted so the schedule is nondecreasing.
inline SmallAllocation random_allocation(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(1, 6), k_dist(1, 5), c_dist(0, 4);
  SmallAllocation inst;
  const int n = n_dist(rng);
  const int K = k_dist(rng);
  inst.F = random_matrix(n, K, rng, 0.0, 1.0);
  for (int k = 0; k < K; ++k) inst.costs.push_back(c_dist(rng));
  std::sort(inst.costs.begin(), inst.costs.end());
  if (static_cast<long>(n) * inst.costs.front() > 8) inst.costs.front() = 0;
  // Keep the instance feasible: everyone can afford the cheapest action.
  const long floor = static_cast<long>(n) * inst.costs.front();
  inst.budget = std::uniform_int_distribution<long>(floor, 8)(rng);
  return inst;
}

// Gradient-check fixture for SIRE: small network and a random batch.
struct SireGradCase {
  incentive::sire::RewardModel model;
  incentive::sire::SireConfig cfg;
  Matrix X;
  std::vector<Action> actions;
  Vector rewards;
};

inline SireGradCase sire_grad_case(std::uint64_t seed, bool structured, double kappa,
                                   incentive::kernels::KernelSpec kernel) {
  std::mt19937_64 rng(seed);
  SireGradCase c;
  c.cfg.hidden_widths = {8, 8};
  c.cfg.repr_dim = 4;
  c.cfg.structured = structured;
  c.cfg.kappa = kappa;
  c.cfg.kernel_z = kernel;
  c.cfg.seed = seed;
  const int d = 6;
  const int K = 3;
  const int n = 32;
  c.model = incentive::sire::init_model(d, K, c.cfg);
  // Perturb the head so the increments sit away from their initial value.
  std::normal_distribution<double> noise(0.0, 0.3);
  for (auto& layer : c.model.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) += noise(rng);
  }
  c.X = random_matrix(n, d, rng);
  std::uniform_int_distribution<int> a(1, K);
  for (int i = 0; i < n; ++i) c.actions.push_back(a(rng));
  c.rewards = (random_matrix(n, 1, rng, 0.0, 1.0)).col(0);
  return c;
}

struct CrmGradCase {
  incentive::crm::LinearSoftmaxPolicy policy;
  Matrix X;
  std::vector<Action> actions;
  Vector rewards;
  Vector rho;
  std::vector<double> costs;
  double lambda = 0.0;
  double eta = 0.0;
};

inline CrmGradCase crm_grad_case(std::uint64_t seed, int n = 50) {
  std::mt19937_64 rng(seed);
  const int d = 5;
  const int K = 4;
  CrmGradCase c;
  c.X = random_matrix(n, d, rng, 0.0, 10.0);
  c.policy.scaling = incentive::crm::InputScaling::fit(c.X);
  c.policy.theta = random_matrix(K, d + 1, rng);
  std::uniform_int_distribution<int> a(1, K);
  for (int i = 0; i < n; ++i) c.actions.push_back(a(rng));
  c.rewards = random_matrix(n, 1, rng, 0.0, 1.0).col(0);
  c.rho = random_matrix(n, 1, rng, 0.05, 1.0).col(0);
  c.costs = {0.0, 1.0, 2.0, 3.0};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  c.lambda = u(rng);
  c.eta = u(rng);
  return c;
}

}  // namespace oracles
