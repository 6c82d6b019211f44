#include "incentive/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace incentive::kernels {
namespace {

Matrix squared_distances(const Matrix& rows) {
  const Vector norms = rows.rowwise().squaredNorm();
  Matrix d = (-2.0 * rows * rows.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

double resolve_gamma(const KernelSpec& kernel, const Matrix& rows) {
  return kernel.gamma ? *kernel.gamma : median_heuristic_gamma(rows);
}

// H A H for symmetric or general square A.
Matrix double_center(const Matrix& A) {
  const Vector row_mean = A.rowwise().mean();
  const Eigen::RowVectorXd col_mean = A.colwise().mean();
  Matrix out = A;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += A.mean();
  return out;
}

}  // namespace

void KernelSpec::validate() const {
  if (kind == KernelKind::kRbf && gamma) {
    require(std::isfinite(*gamma) && *gamma > 0.0, "RBF gamma must be finite and positive");
  }
}

double median_heuristic_gamma(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  if (n < 2) return 1.0;
  const Matrix d = squared_distances(rows);
  std::vector<double> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.push_back(d(i, j));
  }
  const auto mid = pairs.begin() + static_cast<std::ptrdiff_t>(pairs.size() / 2);
  std::nth_element(pairs.begin(), mid, pairs.end());
  const double median = *mid;
  return median > 0.0 ? 1.0 / median : 1.0;
}

Matrix gram(const KernelSpec& kernel, const Matrix& rows) {
  kernel.validate();
  require(rows.rows() >= 1, "gram needs at least one row");
  switch (kernel.kind) {
    case KernelKind::kLinear:
      return rows * rows.transpose();
    case KernelKind::kRbf: {
      const double gamma = resolve_gamma(kernel, rows);
      return (-gamma * squared_distances(rows)).array().exp().matrix();
    }
  }
  return {};
}

Matrix one_hot_encode(std::span<const Action> actions, int n_actions) {
  require(n_actions >= 1, "n_actions must be positive");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Action a = actions[i];
    require(a >= 1 && a <= n_actions,
            "action " + std::to_string(a) + " outside {1.." + std::to_string(n_actions) + "}");
    out(static_cast<Eigen::Index>(i), a - 1) = 1.0;
  }
  return out;
}

double hsic_vstat(const Matrix& K, const Matrix& L) {
  require_dims(K.rows() == K.cols() && L.rows() == L.cols() && K.rows() == L.rows(),
               "hsic_vstat expects two n x n Gram matrices");
  const double n = static_cast<double>(K.rows());
  require(n >= 1, "hsic_vstat needs at least one sample");
  const double joint = K.cwiseProduct(L).sum() / (n * n);
  const double marginal = K.sum() * L.sum() / (n * n * n * n);
  const double cross = 2.0 * K.rowwise().sum().dot(L.rowwise().sum()) / (n * n * n);
  return joint + marginal - cross;
}

double hsic_centered_trace(const Matrix& K, const Matrix& L) {
  require_dims(K.rows() == K.cols() && L.rows() == L.cols() && K.rows() == L.rows(),
               "hsic_centered_trace expects two n x n Gram matrices");
  const double n = static_cast<double>(K.rows());
  // trace(K H L H) = sum_ij K_ji (H L H)_ij
  return K.transpose().cwiseProduct(double_center(L)).sum() / (n * n);
}

HsicWithGradient hsic_with_gradient(const Matrix& Z, const Matrix& L,
                                    const KernelSpec& kernel) {
  kernel.validate();
  require_dims(L.rows() == Z.rows() && L.cols() == Z.rows(),
               "action Gram matrix must be n x n for n rows of Z");
  const double n = static_cast<double>(Z.rows());
  const Matrix G = double_center(L) / (n * n);  // d HSIC / d K
  HsicWithGradient out;
  switch (kernel.kind) {
    case KernelKind::kLinear: {
      const Matrix K = Z * Z.transpose();
      out.value = hsic_vstat(K, L);
      out.grad = 2.0 * G * Z;
      break;
    }
    case KernelKind::kRbf: {
      const double gamma = resolve_gamma(kernel, Z);
      const Matrix K = (-gamma * squared_distances(Z)).array().exp().matrix();
      out.value = hsic_vstat(K, L);
      const Matrix M = G.cwiseProduct(K);
      const Vector row_sums = M.rowwise().sum();
      out.grad = -4.0 * gamma * (row_sums.asDiagonal() * Z - M * Z);
      break;
    }
  }
  return out;
}

Matrix hsic_gradient_z(const Matrix& Z, const Matrix& L, const KernelSpec& kernel) {
  return hsic_with_gradient(Z, L, kernel).grad;
}

double mmd_squared_biased(const Matrix& K, const std::vector<bool>& group) {
  require_dims(K.rows() == K.cols() && static_cast<std::size_t>(K.rows()) == group.size(),
               "mmd_squared_biased expects an n x n Gram matrix and n group flags");
  double aa = 0.0, bb = 0.0, ab = 0.0;
  double na = 0.0, nb = 0.0;
  for (bool g : group) (g ? na : nb) += 1.0;
  require(na > 0.0 && nb > 0.0, "both MMD groups must be nonempty");
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      const bool gi = group[static_cast<std::size_t>(i)];
      const bool gj = group[static_cast<std::size_t>(j)];
      if (gi && gj) {
        aa += K(i, j);
      } else if (!gi && !gj) {
        bb += K(i, j);
      } else {
        ab += K(i, j);
      }
    }
  }
  // ab counts both (i in A, j in B) and (i in B, j in A).
  return aa / (na * na) + bb / (nb * nb) - ab / (na * nb);
}

}  // namespace incentive::kernels
