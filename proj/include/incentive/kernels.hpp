#pragma once

#include "incentive/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace incentive::kernels {

enum class KernelKind { kLinear, kRbf };

// Linear: k(u, v) = <u, v>.  RBF: k(u, v) = exp(-gamma * |u - v|^2).
// An RBF spec without gamma resolves its bandwidth per batch with the
// median heuristic (see median_heuristic_gamma).
struct KernelSpec {
  KernelKind kind = KernelKind::kLinear;
  std::optional<double> gamma;

  static KernelSpec linear() { return {KernelKind::kLinear, std::nullopt}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::kRbf, gamma}; }
  static KernelSpec rbf_median() { return {KernelKind::kRbf, std::nullopt}; }

  void validate() const;
};

// gamma = 1 / median of the squared pairwise distances between rows
// (pairs i < j). Falls back to 1 when the median is zero.
double median_heuristic_gamma(const Matrix& rows);

// Gram matrix of the rows of `rows` (n x p).
Matrix gram(const KernelSpec& kernel, const Matrix& rows);

Matrix one_hot_encode(std::span<const Action> actions, int n_actions);

// Biased V-statistic estimate of HSIC from two n x n Gram matrices, using
// the three-sum form in O(n^2):
//   (1/n^2) sum K.*L + (1/n^4) sum(K) sum(L) - (2/n^3) sum_i rowK_i rowL_i
double hsic_vstat(const Matrix& K, const Matrix& L);

// The same statistic written as trace(K H L H) / n^2, H = I - 11'/n.
// Independent route used to cross-check hsic_vstat.
double hsic_centered_trace(const Matrix& K, const Matrix& L);

struct HsicWithGradient {
  double value = 0.0;
  Matrix grad;  // n x p, d HSIC / d Z
};

// HSIC between the rows of Z (kernel `kernel`) and a fixed Gram matrix L,
// together with its exact gradient with respect to Z. For a median-heuristic
// RBF the bandwidth is computed from Z and held constant when
// differentiating.
HsicWithGradient hsic_with_gradient(const Matrix& Z, const Matrix& L,
                                    const KernelSpec& kernel);

Matrix hsic_gradient_z(const Matrix& Z, const Matrix& L, const KernelSpec& kernel);

// Biased MMD^2 between rows flagged true and rows flagged false.
double mmd_squared_biased(const Matrix& K, const std::vector<bool>& group);

}  // namespace incentive::kernels
