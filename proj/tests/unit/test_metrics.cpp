#include <cmath>

#include "doctest.h"
#include "onshap/metrics.hpp"
#include "test_support.hpp"

using namespace onshap;

TEST_CASE("spearman with ties matches the reference value") {
  const std::vector<double> a = {1, 2, 2, 3, 5}, b = {2, 1, 4, 4, 9};
  CHECK(spearman(a, b) == doctest::Approx(0.7631578947368421).epsilon(1e-12));
  const std::vector<double> ranks = average_ranks(a);
  CHECK(ranks == std::vector<double>{1.0, 2.5, 2.5, 4.0, 5.0});
  CHECK(spearman(a, a) == doctest::Approx(1.0));
}

TEST_CASE("ks distance") {
  CHECK(ks_distance({0.1, 0.4, 0.35, 0.8}, {0.2, 0.9, 0.7, 0.65, 0.5}) == doctest::Approx(0.55));
  CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_distance({0, 0}, {1, 1}) == 1.0);
}

TEST_CASE("gini coefficient") {
  CHECK(gini_coefficient(std::vector<double>{0, 0, 0, 1}) == doctest::Approx(0.75));
  CHECK(gini_coefficient(std::vector<double>{1, -2, 3, -4}) == doctest::Approx(0.25));
  CHECK(gini_coefficient(std::vector<double>{2, 2, 2}) == doctest::Approx(0.0));
  CHECK(gini_coefficient(std::vector<double>{0, 0}) == 0.0);
}

TEST_CASE("property: gini is scale invariant and bounded") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(2 + trial % 30);
    for (double& x : v) x = u(rng);
    const double g = gini_coefficient(v);
    CHECK(g >= -1e-12);
    CHECK(g <= 1.0 - 1.0 / static_cast<double>(v.size()) + 1e-12);
    std::vector<double> scaled = v;
    for (double& x : scaled) x *= -3.7;
    CHECK(gini_coefficient(scaled) == doctest::Approx(g));
  }
}

TEST_CASE("explanation error: top-k must be the ground truth") {
  const std::vector<std::size_t> truth = {0, 2};
  CHECK_FALSE(explanation_in_error(std::vector<double>{0.9, 0.1, 0.5, -2.0}, truth));
  CHECK(explanation_in_error(std::vector<double>{0.9, 0.6, 0.5, 0.0}, truth));
  CHECK(explanation_in_error(std::vector<double>{0.9, 0.5, 0.5, 0.0}, truth));  // tie at the boundary
  Attribution good, bad;
  good.values = {1, 0, 1, 0};
  bad.values = {0, 1, 0, 1};
  const std::vector<Attribution> all = {good, bad, good, good};
  CHECK(explanation_error_rate(all, truth) == doctest::Approx(0.25));
  CHECK_THROWS_AS(explanation_in_error(std::vector<double>{1.0}, truth), UsageError);
}

TEST_CASE("mse aggregation and csv") {
  const std::vector<MseReport> runs = {{0.10, 0.01, 100, "off", "d"}, {0.14, 0.01, 100, "off", "d"}};
  const MseReport agg = aggregate_mse(runs);
  CHECK(agg.mse == doctest::Approx(0.12));
  CHECK(agg.std_error == doctest::Approx(0.02));
  CHECK(agg.method_id == "off");
  const std::vector<MseReport> one = {runs[0]};
  CHECK(aggregate_mse(one).std_error == doctest::Approx(0.01));
  CHECK(MseReport::from_json(agg.to_json()).to_json() == agg.to_json());
  CHECK(mse_table_csv(runs).rfind("dataset,method,mse,std_error\n", 0) == 0);
}

TEST_CASE("attribution agreement") {
  Attribution a, b;
  a.values = {1, 2, 3};
  a.std_errors = {0.1, 0.1, 0.1};
  b.values = {1.05, 2.3, 2.9};
  b.std_errors = {0.1, 0.1, 0.1};
  const Agreement g = attribution_agreement(a, b);
  CHECK(g.spearman_rho == doctest::Approx(1.0));
  CHECK(g.max_abs_diff == doctest::Approx(0.3));
}
