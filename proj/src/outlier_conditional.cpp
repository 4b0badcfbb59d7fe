#include "onshap/outlier_conditional.hpp"

#include <algorithm>
#include <cmath>

namespace onshap {

OutlierConditionalSampler::OutlierConditionalSampler(const OutlierGenConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

double OutlierConditionalSampler::component_mean(std::size_t component, std::size_t feature) const {
  const double z = static_cast<double>(component % 2);
  const bool outlier = component >= 2;
  return outlier && feature < cfg_.flipped_features ? 1.0 - z : z;
}

std::array<double, 4> OutlierConditionalSampler::posterior(const Vector& x, const Coalition& s) const {
  if (static_cast<std::size_t>(x.size()) != cfg_.n_features) {
    throw ShapeError("outlier conditional expects " + std::to_string(cfg_.n_features) + " features");
  }
  const double inv_two_var = 0.5 / (cfg_.sigma * cfg_.sigma);
  std::array<double, 4> log_w{};
  for (std::size_t c = 0; c < 4; ++c) {
    const double prior = 0.5 * (c >= 2 ? cfg_.outlier_fraction : 1.0 - cfg_.outlier_fraction);
    double lw = std::log(prior);
    for (std::size_t i : s.members()) {
      const double d = x[static_cast<Eigen::Index>(i)] - component_mean(c, i);
      lw -= d * d * inv_two_var;
    }
    log_w[c] = lw;
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::array<double, 4> w{};
  double total = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    w[c] = std::exp(log_w[c] - top);
    total += w[c];
  }
  for (double& v : w) v /= total;
  return w;
}

Matrix OutlierConditionalSampler::sample(const Vector& x, std::span<const Coalition> coalitions,
                                         std::size_t n_draws, Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(cfg_.n_features);
  Matrix out(static_cast<Eigen::Index>(coalitions.size() * n_draws), n);
  std::normal_distribution<double> noise(0.0, cfg_.sigma);
  for (std::size_t k = 0; k < coalitions.size(); ++k) {
    const Coalition& s = coalitions[k];
    const auto w = posterior(x, s);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    for (std::size_t t = 0; t < n_draws; ++t) {
      const std::size_t c = pick(rng);
      auto row = out.row(static_cast<Eigen::Index>(k * n_draws + t));
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto fi = static_cast<std::size_t>(i);
        row[i] = s.contains(fi) ? x[i] : component_mean(c, fi) + noise(rng);
      }
    }
  }
  return out;
}

}  // namespace onshap
