#include <bit>
#include <cmath>

#include "doctest.h"
#include "onshap/shapley.hpp"
#include "test_support.hpp"

using namespace onshap;
using onshap::testing::brute_force_shapley;
using onshap::testing::random_game;
using onshap::testing::TableGame;

TEST_CASE("exact values match the permutation oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const TableGame g = random_game(n, rng);
    const Attribution a = shapley_exact(g.vf());
    const std::vector<double> oracle = brute_force_shapley(g);
    CHECK(a.exact);
    for (std::size_t i = 0; i < n; ++i) CHECK(a.values[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("known games") {
  SUBCASE("additive game returns its weights") {
    const std::vector<double> w = {0.5, -1.0, 2.0, 0.0};
    GameValueFunction v(4, [&](const Coalition& s) {
      double total = 3.0;
      for (std::size_t i : s.members()) total += w[i];
      return total;
    });
    const Attribution a = shapley_exact(v);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.values[i] == doctest::Approx(w[i]));
  }
  SUBCASE("unanimity game splits evenly among its carriers") {
    GameValueFunction v(5, [](const Coalition& s) { return s.contains(1) && s.contains(3) ? 1.0 : 0.0; });
    const Attribution a = shapley_exact(v);
    CHECK(a.values[1] == doctest::Approx(0.5));
    CHECK(a.values[3] == doctest::Approx(0.5));
    CHECK(a.values[0] == doctest::Approx(0.0));
  }
  SUBCASE("single feature") {
    GameValueFunction v(1, [](const Coalition& s) { return s.empty() ? 2.0 : 5.0; });
    CHECK(shapley_exact(v).values[0] == doctest::Approx(3.0));
  }
}

TEST_CASE("exact rejects oversize games") {
  GameValueFunction v(kMaxExactFeatures + 1, [](const Coalition&) { return 0.0; });
  CHECK_THROWS_AS(shapley_exact(v), UsageError);
}

TEST_CASE("property: efficiency, dummy, symmetry, linearity") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const std::size_t i = trial % n, j = (trial + 1) % n;
    const TableGame g = random_game(n, rng);
    const Attribution a = shapley_exact(g.vf());
    double total = 0.0;
    for (double v : a.values) total += v;
    CHECK(std::abs(total - (g.values.back() - g.values.front())) < 1e-9);

    const TableGame dummy = onshap::testing::random_game_with_dummy(n, i, rng);
    CHECK(std::abs(shapley_exact(dummy.vf()).values[i]) < 1e-9);

    const TableGame sym = onshap::testing::random_game_with_symmetry(n, i, j, rng);
    const Attribution as = shapley_exact(sym.vf());
    CHECK(std::abs(as.values[i] - as.values[j]) < 1e-9);

    const TableGame h = random_game(n, rng);
    TableGame mix{n, g.values};
    for (std::size_t k = 0; k < mix.values.size(); ++k) mix.values[k] = 2.5 * g.values[k] - 0.7 * h.values[k];
    const Attribution am = shapley_exact(mix.vf()), ah = shapley_exact(h.vf());
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(am.values[k] - (2.5 * a.values[k] - 0.7 * ah.values[k])) < 1e-9);
  }
}

TEST_CASE("monte carlo telescopes and converges") {
  Rng rng(5);
  const TableGame g = random_game(6, rng);
  const Attribution exact = shapley_exact(g.vf());
  for (bool antithetic : {false, true}) {
    McOptions mc;
    mc.n_samples = 20000;
    mc.seed = 9;
    mc.antithetic = antithetic;
    const Attribution a = shapley_mc(g.vf(), mc);
    CHECK(a.n_samples == 20000);
    CHECK(std::abs(a.total() - (g.values.back() - g.values.front())) < 1e-9);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(a.values[i] - exact.values[i]) < 4.5 * a.std_errors[i] + 1e-12);
  }
}

TEST_CASE("monte carlo is deterministic in its seed") {
  Rng rng(6);
  const TableGame g = random_game(5, rng);
  McOptions mc;
  mc.n_samples = 500;
  mc.seed = 77;
  CHECK(shapley_mc(g.vf(), mc).to_json() == shapley_mc(g.vf(), mc).to_json());
  McOptions other = mc;
  other.seed = 78;
  CHECK(shapley_mc(g.vf(), mc).values != shapley_mc(g.vf(), other).values);
}

TEST_CASE("size profile records every coalition size") {
  Rng rng(8);
  const TableGame g = random_game(5, rng);
  SizeProfile profile(5);
  McOptions mc;
  mc.n_samples = 400;
  mc.profile = &profile;
  shapley_mc(g.vf(), mc);
  for (std::size_t k = 0; k < 5; ++k) CHECK(profile.count(k) == 400);
  const SizeProfile back = SizeProfile::from_json(profile.to_json());
  CHECK(back.to_json() == profile.to_json());
  CHECK(std::isnan(back.small_coalition_mass()) == std::isnan(profile.small_coalition_mass()));
}

TEST_CASE("small-coalition mass splits the telescoped total by size") {
  // v(S) = |S|^2 grows by 2k + 1 at size k: 1, 3, 5, 7, 9.
  TableGame g{5, std::vector<double>(32)};
  for (std::uint64_t b = 0; b < 32; ++b) g.values[b] = std::pow(std::popcount(b), 2);
  SizeProfile profile(5);
  McOptions mc;
  mc.n_samples = 50;
  mc.profile = &profile;
  shapley_mc(g.vf(), mc);
  CHECK(profile.small_coalition_mass() == doctest::Approx(9.0 / 25.0).epsilon(1e-12));
  TableGame flat{5, std::vector<double>(32, 1.0)};
  SizeProfile none(5);
  mc.profile = &none;
  shapley_mc(flat.vf(), mc);
  CHECK(std::isnan(none.small_coalition_mass()));
}

TEST_CASE("global values satisfy the global sum rule exactly per sample") {
  // Model-free check: a game whose v(N) and v(empty) are fixed per row.
  Rng rng(10);
  Matrix points = onshap::testing::random_matrix(30, 3, rng);
  std::vector<int> labels(30);
  for (std::size_t r = 0; r < 30; ++r) labels[r] = static_cast<int>(r % 2);
  VfFactory factory = [](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<GameValueFunction>(3, [x, y](const Coalition& s) {
      double total = y;
      for (std::size_t i : s.members()) total += x[static_cast<Eigen::Index>(i)];
      return total;
    });
  };
  const Attribution a = shapley_global(points, labels, factory, 3000, 4);
  CHECK(a.scope == AttributionScope::global);
  CHECK(std::abs(a.sum_rule_residual) < 1e-9);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(a.values[i] - points.col(static_cast<Eigen::Index>(i)).mean()) < 4.5 * a.std_errors[i]);
  }
}
