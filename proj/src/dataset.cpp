#include "incentive/dataset.hpp"

#include <cmath>
#include <string>

namespace incentive {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "validation") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw ValidationError("unknown split tag '" + std::string(text) + "'");
}

std::vector<std::size_t> BanditDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

BanditDataset BanditDataset::subset(Split split) const {
  return subset(indices(split));
}

BanditDataset BanditDataset::subset(const std::vector<std::size_t>& rows) const {
  BanditDataset out;
  out.n_actions = n_actions;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, features.cols());
  out.rewards.resize(n);
  out.actions.reserve(rows.size());
  out.splits.reserve(rows.size());
  if (propensities) out.propensities = Matrix(n, propensities->cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
    require_dims(src < features.rows(), "subset row index out of range");
    out.features.row(r) = features.row(src);
    out.rewards(r) = rewards(src);
    out.actions.push_back(actions[static_cast<std::size_t>(src)]);
    out.splits.push_back(splits[static_cast<std::size_t>(src)]);
    if (propensities) out.propensities->row(r) = propensities->row(src);
  }
  return out;
}

void BanditDataset::validate() const {
  const auto n = static_cast<Eigen::Index>(actions.size());
  require_dims(features.rows() == n, "features/actions row count mismatch");
  require_dims(rewards.size() == n, "rewards/actions length mismatch");
  require_dims(splits.size() == actions.size(), "splits/actions length mismatch");
  require(n_actions >= 1, "dataset must declare at least one action");
  for (Action a : actions) {
    require(a >= 1 && a <= n_actions,
            "action " + std::to_string(a) + " outside {1.." +
                std::to_string(n_actions) + "}");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::isfinite(rewards(i)) && rewards(i) >= 0.0 && rewards(i) <= 1.0,
            "reward outside [0, 1] at row " + std::to_string(i));
  }
  if (propensities) {
    require_dims(propensities->rows() == n && propensities->cols() == n_actions,
                 "propensity matrix must be n x n_actions");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double total = propensities->row(i).sum();
      require(std::abs(total - 1.0) <= 1e-9,
              "propensity row " + std::to_string(i) + " does not sum to 1");
      require(propensities->row(i).minCoeff() > 0.0,
              "propensity row " + std::to_string(i) + " has a nonpositive entry");
    }
  }
}

}  // namespace incentive
