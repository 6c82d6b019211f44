#pragma once

#include "incentive/common.hpp"

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace incentive {

enum class Split { kTrain, kValidation, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// Logged bandit feedback: one (features, action, reward) triple per row,
// optionally with the logging policy's full action distribution.
struct BanditDataset {
  Matrix features;                     // n x d
  std::vector<Action> actions;         // n labels in {1..n_actions}
  Vector rewards;                      // n values in [0, 1]
  std::optional<Matrix> propensities;  // n x n_actions, row-stochastic
  std::vector<Split> splits;           // n tags
  int n_actions = 0;

  std::size_t size() const { return actions.size(); }
  std::size_t feature_dim() const {
    return static_cast<std::size_t>(features.cols());
  }

  std::vector<std::size_t> indices(Split split) const;
  BanditDataset subset(Split split) const;
  BanditDataset subset(const std::vector<std::size_t>& rows) const;

  // Throws ValidationError/DimensionError if any invariant is broken:
  // consistent sizes, actions in range, rewards in [0, 1], propensity rows
  // summing to 1 within 1e-9 with strictly positive entries.
  void validate() const;
};

}  // namespace incentive
