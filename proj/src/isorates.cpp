#include "incentive/isorates.hpp"

#include "incentive/io.hpp"
#include "incentive/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace incentive::isorates {

std::vector<double> pava(const std::vector<double>& values, const std::vector<double>& weights) {
  require_dims(values.size() == weights.size(), "pava: values and weights differ in length");
  for (double w : weights) require(w > 0.0 && std::isfinite(w), "pava: weights must be positive");

  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

double weighted_sse(const std::vector<double>& fit, const std::vector<double>& values,
                    const std::vector<double>& weights) {
  require_dims(fit.size() == values.size() && values.size() == weights.size(),
               "weighted_sse: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < fit.size(); ++k) {
    const double e = fit[k] - values[k];
    total += weights[k] * e * e;
  }
  return total;
}

std::vector<double> ls_constant_fit(const Matrix& R) {
  require(R.rows() >= 1, "need at least one row");
  std::vector<double> out(static_cast<std::size_t>(R.cols()));
  // Shifted by the first entry so a constant column is reproduced exactly.
  for (Eigen::Index k = 0; k < R.cols(); ++k) {
    const double shift = R(0, k);
    out[static_cast<std::size_t>(k)] = shift + (R.col(k).array() - shift).mean();
  }
  return out;
}

std::vector<double> ls_monotone_fit(const Matrix& R) {
  const auto means = ls_constant_fit(R);
  return pava(means, std::vector<double>(means.size(), static_cast<double>(R.rows())));
}

void RateConfig::validate() const {
  require(!K_grid.empty(), "K_grid is empty");
  for (int K : K_grid) require(K >= 2, "every K must be at least 2");
  require(n >= 1, "n must be positive");
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be finite and nonnegative");
  require(trials >= 1, "trials must be at least 1");
}

void RateTable::write_csv(std::ostream& out) const {
  out << "K,n,sigma,trials,mean_error_constant,mean_error_monotone,std_error_constant,"
         "std_error_monotone\n";
  for (const RateRow& r : rows) {
    out << r.K << ',' << n << ',' << io::format_real(sigma) << ',' << trials << ','
        << io::format_real(r.mean_error_constant) << ',' << io::format_real(r.mean_error_monotone)
        << ',' << io::format_real(r.std_error_constant) << ','
        << io::format_real(r.std_error_monotone) << '\n';
  }
}

RateTable rate_experiment(const RateConfig& cfg) {
  cfg.validate();
  RateTable table;
  table.n = cfg.n;
  table.sigma = cfg.sigma;
  table.trials = cfg.trials;
  const std::uint64_t root = derive_seed(cfg.seed, "isorates");
  for (int K : cfg.K_grid) {
    std::vector<double> err_c, err_m;
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t cell = derive_seed(derive_seed(root, static_cast<std::uint64_t>(K)),
                                             static_cast<std::uint64_t>(t));
      Xoshiro256 rng(cell);
      std::vector<double> truth(static_cast<std::size_t>(K));
      for (double& v : truth) v = rng.uniform();
      std::sort(truth.begin(), truth.end());
      std::normal_distribution<double> noise(0.0, 1.0);
      Matrix R(cfg.n, K);
      for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index i = 0; i < cfg.n; ++i) {
          R(i, k) = truth[static_cast<std::size_t>(k)] + cfg.sigma * noise(rng);
        }
      }
      const std::vector<double> unit(truth.size(), 1.0);
      const auto fc = ls_constant_fit(R);
      const auto fm = ls_monotone_fit(R);
      err_c.push_back(weighted_sse(fc, truth, unit) / K);
      err_m.push_back(weighted_sse(fm, truth, unit) / K);
    }
    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair{mean, sd};
    };
    const auto [mc, sc] = mean_std(err_c);
    const auto [mm, sm] = mean_std(err_m);
    table.rows.push_back({K, mc, mm, sc, sm});
  }
  return table;
}

}  // namespace incentive::isorates
