#include <cmath>
#include <map>

#include "doctest.h"
#include "onshap/coalition.hpp"
#include "test_support.hpp"

using namespace onshap;

TEST_CASE("coalition basics") {
  Coalition s(70);
  s.insert(0);
  s.insert(65);
  CHECK(s.size() == 2);
  CHECK(s.members() == std::vector<std::size_t>{0, 65});
  CHECK(Coalition::from_hex(70, s.to_hex()) == s);
  CHECK(s.to_hex().size() == 18);
  s.erase(65);
  CHECK(s.size() == 1);
  CHECK(Coalition::full(70).size() == 70);
  CHECK(Coalition::from_bits(4, 0b1010).members() == std::vector<std::size_t>{1, 3});
}

TEST_CASE("masking writes the sentinel outside S") {
  const double x[3] = {0.2, 0.4, 0.6};
  double out[3];
  apply_mask(x, Coalition::from_indices(3, {1}), out);
  CHECK(out[0] == kMaskSentinel);
  CHECK(out[1] == 0.4);
  CHECK(out[2] == kMaskSentinel);
}

TEST_CASE("shapley coalition probabilities sum to one") {
  for (std::size_t n : {1, 2, 5, 12}) {
    double total = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      total += shapley_coalition_probability(n, k) * std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK(shapley_coalition_probability(n, 0) * 1.0 == doctest::Approx(1.0 / (2.0 * n)));
  }
}

TEST_CASE("property: sampled coalition sizes follow the mixture") {
  Rng rng(7);
  const std::size_t n = 6, draws = 120000;
  std::map<std::size_t, std::size_t> sizes;
  std::vector<std::size_t> member_counts(n, 0);
  for (std::size_t d = 0; d < draws; ++d) {
    const Coalition s = sample_shapley_coalition(n, rng);
    ++sizes[s.size()];
    for (std::size_t i : s.members()) ++member_counts[i];
  }
  for (std::size_t k = 0; k <= n; ++k) {
    const double expected = (k == 0 || k == n) ? 1.0 / (2.0 * n) : 1.0 / n;
    const double got = static_cast<double>(sizes[k]) / draws;
    CHECK(std::abs(got - expected) < 5 * std::sqrt(expected * (1 - expected) / draws));
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(static_cast<double>(member_counts[i]) / draws == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("random permutations are permutations") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    auto p = random_permutation(9, rng);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 9; ++i) CHECK(p[i] == i);
  }
}
