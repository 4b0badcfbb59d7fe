#include "onshap/value_function.hpp"

#include <algorithm>

namespace onshap {

double ValueFunction::evaluate(const Coalition& s, Rng& rng) const {
  double out = 0.0;
  evaluate_batch(std::span<const Coalition>(&s, 1), rng, std::span<double>(&out, 1));
  return out;
}

void ValueFunction::evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                                 std::span<double> out,
                                                 std::span<double> variance) const {
  evaluate_batch(coalitions, rng, out);
  std::fill(variance.begin(), variance.end(), 0.0);
}

double ValueFunction::evaluate(const Coalition& s) const {
  Rng rng(0);
  return evaluate(s, rng);
}

void GameValueFunction::evaluate_batch(std::span<const Coalition> coalitions, Rng&,
                                       std::span<double> out) const {
  for (std::size_t k = 0; k < coalitions.size(); ++k) out[k] = game_(coalitions[k]);
}

}  // namespace onshap
