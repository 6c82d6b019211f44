#pragma once

#include "incentive/common.hpp"
#include "incentive/dataset.hpp"
#include "incentive/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace incentive::sire {

struct SireConfig {
  std::vector<int> hidden_widths{512, 512, 512};
  int repr_dim = 64;
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 128;
  double kappa = 0.0;
  kernels::KernelSpec kernel_z = kernels::KernelSpec::linear();
  bool structured = true;
  std::uint64_t seed = 0;
  // Minibatches smaller than this skip the HSIC term.
  int min_hsic_batch = 16;
  // Increment heads use softplus_beta(t) = log(1 + exp(beta t)) / beta.
  double increment_sharpness = 30.0;
  // Initial value of every increment (and 0.5 for the base head).
  double increment_init = 0.1;
  double base_init = 0.5;
  bool standardize_inputs = true;
  // Start the head biases at the first moment of the train rewards instead
  // of base_init.
  bool bias_from_data = true;

  void validate() const;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

using LayerStack = std::vector<DenseLayer>;

// Representation network z = Lambda(x) (ReLU hidden layers followed by a
// linear projection) and a response head on z. layers.back() is the head,
// with one output per action:
//   structured:   f(x, k) = raw_1(z) + sum_{j=2..k} softplus_beta(raw_j(z))
//   unstructured: f(x, k) = raw_k(z)
// The structured form is nondecreasing in k for every x by construction.
struct RewardModel {
  Vector input_mean;
  Vector input_scale;
  LayerStack layers;
  int n_actions = 0;
  bool structured = true;
  double sharpness = 30.0;

  Eigen::Index input_dim() const { return input_mean.size(); }
  Eigen::Index repr_dim() const { return layers.back().inputs(); }

  // n x repr_dim
  Matrix represent(const Matrix& X) const;
  // n x n_actions predictions for every action.
  Matrix predict_all(const Matrix& X) const;
  double predict(const Vector& x, Action y) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  nlohmann::json to_json() const;
  static RewardModel from_json(const nlohmann::json& j);
};

double predict_reward(const RewardModel& model, const Vector& x, Action y);

RewardModel init_model(Eigen::Index input_dim, int n_actions, const SireConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  double mse = 0.0;
  double hsic = 0.0;
  bool hsic_applied = false;
  LayerStack grad;  // same shapes as model.layers
};

// Squared error at the logged actions plus kappa * HSIC(Lambda(X), onehot(y))
// on this batch, with gradients for every layer.
LossAndGrad loss_and_grad(const RewardModel& model, const Matrix& X,
                          std::span<const Action> actions, const Vector& rewards,
                          const SireConfig& cfg);

// init_model plus the data-dependent parts of initialization: input
// standardization from the train split and (when bias_from_data) head biases
// centred on the mean train reward. train() starts from this model.
RewardModel initialize(const BanditDataset& dataset, const SireConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double hsic = 0.0;
};

// Minibatch SGD over the train split. Deterministic given cfg.seed.
// Throws NumericalError when the loss becomes non-finite.
RewardModel train(const BanditDataset& dataset, const SireConfig& cfg,
                  std::vector<EpochRecord>* log = nullptr);

// Mean squared error of predictions at the logged actions.
double factual_mse(const RewardModel& model, const BanditDataset& data);

struct KappaSelection {
  double best_kappa = 0.0;
  std::size_t best_index = 0;
  std::vector<double> grid;
  std::vector<double> validation_mse;
  std::vector<RewardModel> models;
};

inline const std::vector<double> kDefaultKappaGrid{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0};

// One model per grid value (same seed), scored by factual validation MSE.
// Ties go to the larger kappa.
// `logs`, when given, receives one training log per grid value.
KappaSelection select_kappa(const BanditDataset& dataset, const SireConfig& cfg,
                            const std::vector<double>& grid,
                            std::vector<std::vector<EpochRecord>>* logs = nullptr);

}  // namespace incentive::sire
