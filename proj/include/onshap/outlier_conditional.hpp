#pragma once

#include <array>

#include "onshap/conditional_sampler.hpp"
#include "onshap/generators.hpp"

namespace onshap {

/// Exact conditional p(x' | x_S) of the synthetic outlier process: a posterior
/// over the four mixture components (inlier/outlier x z = 0/1) given x_S,
/// then independent normals around the chosen component's means.
class OutlierConditionalSampler final : public ConditionalSampler {
 public:
  explicit OutlierConditionalSampler(const OutlierGenConfig& cfg);

  std::size_t n_features() const override { return cfg_.n_features; }
  std::string id() const override { return "analytic_conditional"; }
  Matrix sample(const Vector& x, std::span<const Coalition> coalitions, std::size_t n_draws,
                Rng& rng) const override;

  /// Posterior weights ordered (inlier z=0, inlier z=1, outlier z=0, outlier z=1).
  std::array<double, 4> posterior(const Vector& x, const Coalition& s) const;
  /// Mean of feature i under a component in the order above.
  double component_mean(std::size_t component, std::size_t feature) const;

 private:
  OutlierGenConfig cfg_;
};

}  // namespace onshap
