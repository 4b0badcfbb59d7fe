#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "onshap/coalition.hpp"

namespace onshap {

/// Draws x' ~ p(x' | x_S) with the in-coalition slots equal to x_S.
class ConditionalSampler {
 public:
  virtual ~ConditionalSampler() = default;
  virtual std::size_t n_features() const = 0;
  virtual std::string id() const = 0;

  /// Returns coalitions.size() * n_draws rows; rows [k*n_draws, (k+1)*n_draws)
  /// are draws conditioned on coalitions[k].
  virtual Matrix sample(const Vector& x, std::span<const Coalition> coalitions,
                        std::size_t n_draws, Rng& rng) const = 0;
};

}  // namespace onshap
