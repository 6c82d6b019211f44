#include "incentive/sire.hpp"

#include "incentive/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace incentive::sire {
namespace {

// log(1 + exp(beta t)) / beta without overflow.
double softplus(double t, double beta) {
  const double s = beta * t;
  if (s > 30.0) return t;
  return std::log1p(std::exp(s)) / beta;
}

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double inverse_softplus(double value, double beta) {
  return std::log(std::expm1(beta * value)) / beta;
}

struct Forward {
  Matrix input;               // d x n, standardized
  std::vector<Matrix> acts;   // output of each non-head layer
  Matrix raw;                 // K x n head outputs
  Matrix pred;                // K x n predictions
};

Matrix standardize(const RewardModel& model, const Matrix& X) {
  require_dims(X.cols() == model.input_dim(),
               "model expects " + std::to_string(model.input_dim()) + " features, got " +
                   std::to_string(X.cols()));
  return ((X.rowwise() - model.input_mean.transpose()).array().rowwise() /
          model.input_scale.transpose().array())
      .matrix()
      .transpose();
}

Forward forward(const RewardModel& model, const Matrix& X) {
  Forward f;
  f.input = standardize(model, X);
  const std::size_t n_layers = model.layers.size();
  const Matrix* current = &f.input;
  f.acts.reserve(n_layers - 1);
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    const auto& layer = model.layers[l];
    Matrix out = layer.weight * (*current);
    out.colwise() += layer.bias;
    if (l + 2 < n_layers) out = out.cwiseMax(0.0);  // hidden: ReLU; last: linear z
    f.acts.push_back(std::move(out));
    current = &f.acts.back();
  }
  const auto& head = model.layers.back();
  f.raw = head.weight * (*current);
  f.raw.colwise() += head.bias;

  f.pred.resize(f.raw.rows(), f.raw.cols());
  if (model.structured) {
    f.pred.row(0) = f.raw.row(0);
    for (Eigen::Index k = 1; k < f.raw.rows(); ++k) {
      for (Eigen::Index i = 0; i < f.raw.cols(); ++i) {
        f.pred(k, i) = f.pred(k - 1, i) + softplus(f.raw(k, i), model.sharpness);
      }
    }
  } else {
    f.pred = f.raw;
  }
  return f;
}

void uniform_fill(Matrix& m, double limit, Xoshiro256& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = limit * (2.0 * rng.uniform() - 1.0);
  }
}

Matrix gather_rows(const Matrix& X, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace

void SireConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 0, "epochs must be nonnegative");
  require(repr_dim >= 1, "repr_dim must be positive");
  for (int w : hidden_widths) require(w >= 1, "hidden widths must be positive");
  require(kappa >= 0.0 && std::isfinite(kappa), "kappa must be finite and nonnegative");
  require(increment_sharpness > 0.0, "increment_sharpness must be positive");
  require(increment_init > 0.0, "increment_init must be positive");
  kernel_z.validate();
}

Matrix RewardModel::represent(const Matrix& X) const {
  Forward f = forward(*this, X);
  return f.acts.back().transpose();
}

Matrix RewardModel::predict_all(const Matrix& X) const {
  return forward(*this, X).pred.transpose();
}

double RewardModel::predict(const Vector& x, Action y) const {
  require(y >= 1 && y <= n_actions,
          "action " + std::to_string(y) + " outside {1.." + std::to_string(n_actions) + "}");
  return predict_all(x.transpose())(0, y - 1);
}

double predict_reward(const RewardModel& model, const Vector& x, Action y) {
  return model.predict(x, y);
}

std::size_t RewardModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

std::vector<double> RewardModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

void RewardModel::unflatten(std::span<const double> params) {
  require_dims(params.size() == parameter_count(), "parameter vector has the wrong length");
  std::size_t offset = 0;
  for (auto& layer : layers) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), layer.weight.size(),
                layer.weight.data());
    offset += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), layer.bias.size(),
                layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  }
}

nlohmann::json RewardModel::to_json() const {
  nlohmann::json j;
  j["format"] = "incentive.reward_model.v1";
  j["n_actions"] = n_actions;
  j["structured"] = structured;
  j["sharpness"] = sharpness;
  j["input_mean"] = std::vector<double>(input_mean.data(), input_mean.data() + input_mean.size());
  j["input_scale"] =
      std::vector<double>(input_scale.data(), input_scale.data() + input_scale.size());
  auto& arr = j["layers"] = nlohmann::json::array();
  for (const auto& layer : layers) {
    // Weights are stored row-major: weight[r * cols + c].
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    }
    arr.push_back({{"rows", layer.weight.rows()},
                   {"cols", layer.weight.cols()},
                   {"weight", std::move(w)},
                   {"bias", std::vector<double>(layer.bias.data(),
                                                layer.bias.data() + layer.bias.size())}});
  }
  return j;
}

RewardModel RewardModel::from_json(const nlohmann::json& j) {
  require(j.value("format", std::string{}) == "incentive.reward_model.v1",
          "unrecognized model checkpoint format");
  RewardModel m;
  m.n_actions = j.at("n_actions").get<int>();
  m.structured = j.at("structured").get<bool>();
  m.sharpness = j.at("sharpness").get<double>();
  const auto mean = j.at("input_mean").get<std::vector<double>>();
  const auto scale = j.at("input_scale").get<std::vector<double>>();
  require_dims(mean.size() == scale.size(), "input_mean/input_scale length mismatch");
  m.input_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.input_scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  for (const auto& lj : j.at("layers")) {
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto w = lj.at("weight").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    require_dims(static_cast<Eigen::Index>(w.size()) == rows * cols &&
                     static_cast<Eigen::Index>(b.size()) == rows,
                 "layer parameter arrays do not match the declared shape");
    DenseLayer layer;
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        layer.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      }
    }
    layer.bias = Eigen::Map<const Vector>(b.data(), rows);
    m.layers.push_back(std::move(layer));
  }
  require(m.layers.size() >= 2, "checkpoint needs a representation layer and a head");
  require_dims(m.layers.back().outputs() == m.n_actions, "head width differs from n_actions");
  require_dims(m.layers.front().inputs() == m.input_dim(), "first layer width differs from input");
  return m;
}

RewardModel init_model(Eigen::Index input_dim, int n_actions, const SireConfig& cfg) {
  cfg.validate();
  require(n_actions >= 1, "n_actions must be positive");
  auto rng = make_stream(cfg.seed, "sire_init");
  RewardModel m;
  m.n_actions = n_actions;
  m.structured = cfg.structured;
  m.sharpness = cfg.increment_sharpness;
  m.input_mean = Vector::Zero(input_dim);
  m.input_scale = Vector::Ones(input_dim);

  // Hidden layers: He-uniform, limit sqrt(6 / fan_in), zero bias.
  // Projection to z and the head: limit 1 / sqrt(fan_in); the head is
  // further scaled by 0.1 so initial predictions stay near the bias values.
  Eigen::Index fan_in = input_dim;
  for (int width : cfg.hidden_widths) {
    DenseLayer layer{Matrix(width, fan_in), Vector::Zero(width)};
    uniform_fill(layer.weight, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
    m.layers.push_back(std::move(layer));
    fan_in = width;
  }
  DenseLayer projection{Matrix(cfg.repr_dim, fan_in), Vector::Zero(cfg.repr_dim)};
  uniform_fill(projection.weight, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  m.layers.push_back(std::move(projection));

  DenseLayer head{Matrix(n_actions, cfg.repr_dim), Vector(n_actions)};
  uniform_fill(head.weight, 0.1 / std::sqrt(static_cast<double>(cfg.repr_dim)), rng);
  if (cfg.structured) {
    head.bias(0) = cfg.base_init;
    for (int k = 1; k < n_actions; ++k) {
      head.bias(k) = inverse_softplus(cfg.increment_init, cfg.increment_sharpness);
    }
  } else {
    head.bias.setConstant(cfg.base_init);
  }
  m.layers.push_back(std::move(head));
  return m;
}

LossAndGrad loss_and_grad(const RewardModel& model, const Matrix& X,
                          std::span<const Action> actions, const Vector& rewards,
                          const SireConfig& cfg) {
  const Eigen::Index n = X.rows();
  require(n >= 1, "loss_and_grad needs a nonempty batch");
  require_dims(static_cast<Eigen::Index>(actions.size()) == n && rewards.size() == n,
               "batch features, actions and rewards must have equal lengths");
  for (Action a : actions) {
    require(a >= 1 && a <= model.n_actions, "batch action outside the model's range");
  }

  const Forward f = forward(model, X);
  const std::size_t n_layers = model.layers.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossAndGrad out;
  out.grad.resize(n_layers);

  // d loss / d pred, nonzero only at the logged action.
  Vector residual(n);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    residual(i) = f.pred(actions[static_cast<std::size_t>(i)] - 1, i) - rewards(i);
    sse += residual(i) * residual(i);
  }
  out.mse = sse * inv_n;

  Matrix d_raw = Matrix::Zero(model.n_actions, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = actions[static_cast<std::size_t>(i)] - 1;
    const double g = 2.0 * inv_n * residual(i);
    if (model.structured) {
      d_raw(0, i) = g;
      for (Eigen::Index j = 1; j <= k; ++j) {
        d_raw(j, i) = g * logistic(model.sharpness * f.raw(j, i));
      }
    } else {
      d_raw(k, i) = g;
    }
  }

  const Matrix& z = f.acts.back();  // repr_dim x n
  const auto& head = model.layers.back();
  out.grad.back().weight.noalias() = d_raw * z.transpose();
  out.grad.back().bias = d_raw.rowwise().sum();
  Matrix d_act = head.weight.transpose() * d_raw;

  out.loss = out.mse;
  if (cfg.kappa > 0.0) {
    if (n >= cfg.min_hsic_batch) {
      const Matrix onehot = kernels::one_hot_encode(actions, model.n_actions);
      const Matrix L = onehot * onehot.transpose();
      const auto hsic = kernels::hsic_with_gradient(z.transpose(), L, cfg.kernel_z);
      out.hsic = hsic.value;
      out.hsic_applied = true;
      out.loss += cfg.kappa * hsic.value;
      d_act += cfg.kappa * hsic.grad.transpose();
    }
  }

  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const auto& layer = model.layers[l];
    const Matrix& input = l == 0 ? f.input : f.acts[l - 1];
    if (l + 2 < n_layers) {
      d_act = d_act.cwiseProduct((f.acts[l].array() > 0.0).cast<double>().matrix());
    }
    out.grad[l].weight.noalias() = d_act * input.transpose();
    out.grad[l].bias = d_act.rowwise().sum();
    if (l > 0) d_act = layer.weight.transpose() * d_act;
  }
  return out;
}

double factual_mse(const RewardModel& model, const BanditDataset& data) {
  require(data.size() >= 1, "factual_mse needs at least one row");
  const Matrix pred = model.predict_all(data.features);
  double sse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = pred(static_cast<Eigen::Index>(i), data.actions[i] - 1) -
                     data.rewards(static_cast<Eigen::Index>(i));
    sse += e * e;
  }
  return sse / static_cast<double>(data.size());
}

RewardModel initialize(const BanditDataset& dataset, const SireConfig& cfg) {
  cfg.validate();
  const auto rows = dataset.indices(Split::kTrain);
  require(!rows.empty(), "dataset has no train split");

  RewardModel model = init_model(dataset.features.cols(), dataset.n_actions, cfg);
  if (cfg.standardize_inputs) {
    const Matrix Xtr = gather_rows(dataset.features, rows);
    model.input_mean = Xtr.colwise().mean().transpose();
    const Matrix centered = Xtr.rowwise() - model.input_mean.transpose();
    model.input_scale =
        (centered.colwise().squaredNorm() / static_cast<double>(Xtr.rows())).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < model.input_scale.size(); ++j) {
      if (!(model.input_scale(j) > 0.0)) model.input_scale(j) = 1.0;
    }
  }
  if (cfg.bias_from_data) {
    // Match the mean prediction at the logged actions to the mean reward.
    double mean_reward = 0.0, mean_steps = 0.0;
    for (std::size_t i : rows) {
      mean_reward += dataset.rewards(static_cast<Eigen::Index>(i));
      mean_steps += dataset.actions[i] - 1;
    }
    mean_reward /= static_cast<double>(rows.size());
    mean_steps /= static_cast<double>(rows.size());
    auto& bias = model.layers.back().bias;
    if (cfg.structured) {
      bias(0) = mean_reward - cfg.increment_init * mean_steps;
    } else {
      bias.setConstant(mean_reward);
    }
  }
  return model;
}

RewardModel train(const BanditDataset& dataset, const SireConfig& cfg,
                  std::vector<EpochRecord>* log) {
  RewardModel model = initialize(dataset, cfg);
  const auto rows = dataset.indices(Split::kTrain);

  if (cfg.kappa > 0.0 && static_cast<std::size_t>(cfg.min_hsic_batch) > rows.size()) {
    spdlog::warn("train split has {} rows, below the HSIC minimum batch of {}; penalty skipped",
                 rows.size(), cfg.min_hsic_batch);
  }

  auto rng = make_stream(cfg.seed, "sire_minibatch");
  std::vector<std::size_t> order = rows;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<Action> batch_actions;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0, hsic_sum = 0.0;
    int hsic_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix Xb = gather_rows(dataset.features, idx);
      Vector rb(static_cast<Eigen::Index>(idx.size()));
      batch_actions.clear();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        batch_actions.push_back(dataset.actions[idx[i]]);
        rb(static_cast<Eigen::Index>(i)) = dataset.rewards(static_cast<Eigen::Index>(idx[i]));
      }
      const LossAndGrad lg = loss_and_grad(model, Xb, batch_actions, rb, cfg);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                             " (non-finite loss)");
      }
      sse += lg.mse * static_cast<double>(idx.size());
      if (lg.hsic_applied) {
        hsic_sum += lg.hsic;
        ++hsic_batches;
      }
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        model.layers[l].weight.noalias() -= cfg.learning_rate * lg.grad[l].weight;
        model.layers[l].bias.noalias() -= cfg.learning_rate * lg.grad[l].bias;
      }
    }
    if (log) {
      log->push_back({epoch, sse / static_cast<double>(order.size()),
                      hsic_batches > 0 ? hsic_sum / hsic_batches : 0.0});
    }
  }
  return model;
}

KappaSelection select_kappa(const BanditDataset& dataset, const SireConfig& cfg,
                            const std::vector<double>& grid,
                            std::vector<std::vector<EpochRecord>>* logs) {
  require(!grid.empty(), "kappa grid is empty");
  const BanditDataset validation = dataset.subset(Split::kValidation);
  require(validation.size() >= 1, "dataset has no validation split");

  KappaSelection sel;
  sel.grid = grid;
  for (double kappa : grid) {
    SireConfig c = cfg;
    c.kappa = kappa;
    std::vector<EpochRecord> log;
    sel.models.push_back(train(dataset, c, logs ? &log : nullptr));
    if (logs) logs->push_back(std::move(log));
    sel.validation_mse.push_back(factual_mse(sel.models.back(), validation));
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double best = sel.validation_mse[sel.best_index];
    const double cand = sel.validation_mse[i];
    if (cand < best || (cand == best && grid[i] > grid[sel.best_index])) sel.best_index = i;
  }
  sel.best_kappa = grid[sel.best_index];
  return sel;
}

}  // namespace incentive::sire
