#include <cmath>

#include "doctest.h"
#include "onshap/outlier_conditional.hpp"
#include "test_support.hpp"

using namespace onshap;

namespace {

// Posterior by direct density products over the four generating components.
std::array<double, 4> posterior_oracle(const OutlierGenConfig& cfg, const Vector& x, const Coalition& s) {
  std::array<double, 4> w{};
  double total = 0.0;
  for (int c = 0; c < 4; ++c) {
    const bool outlier = c >= 2;
    const double z = c % 2;
    double p = 0.5 * (outlier ? cfg.outlier_fraction : 1.0 - cfg.outlier_fraction);
    for (std::size_t i : s.members()) {
      const double mean = outlier && i < cfg.flipped_features ? 1.0 - z : z;
      const double u = (x[static_cast<Eigen::Index>(i)] - mean) / cfg.sigma;
      p *= std::exp(-0.5 * u * u) / (cfg.sigma * std::sqrt(2 * M_PI));
    }
    w[static_cast<std::size_t>(c)] = p;
    total += p;
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

TEST_CASE("posterior matches direct Bayes on small problems") {
  OutlierGenConfig cfg;
  cfg.n_features = 6;
  cfg.flipped_features = 2;
  cfg.sigma = 0.4;
  cfg.outlier_fraction = 0.1;
  const OutlierConditionalSampler sampler(cfg);
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = onshap::testing::random_matrix(1, 6, rng, -0.5, 1.5).row(0).transpose();
    const Coalition s = Coalition::from_bits(6, static_cast<std::uint64_t>(trial % 64));
    const auto got = sampler.posterior(x, s);
    const auto want = posterior_oracle(cfg, x, s);
    for (std::size_t c = 0; c < 4; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-9));
  }
}

TEST_CASE("empty coalition gives the prior") {
  OutlierGenConfig cfg;
  const OutlierConditionalSampler sampler(cfg);
  const auto w = sampler.posterior(Vector::Zero(20), Coalition(20));
  CHECK(w[0] == doctest::Approx(0.495));
  CHECK(w[1] == doctest::Approx(0.495));
  CHECK(w[2] == doctest::Approx(0.005));
  CHECK(w[3] == doctest::Approx(0.005));
}

TEST_CASE("conditioning on the unflipped block leaves the outlier mode at its prior") {
  OutlierGenConfig cfg;
  cfg.sigma = 0.01;
  const OutlierConditionalSampler sampler(cfg);
  const Vector x = Vector::Ones(20);
  std::vector<std::size_t> members;
  for (std::size_t i = 5; i < 20; ++i) members.push_back(i);
  const Coalition s = Coalition::from_indices(20, members);
  const auto w = sampler.posterior(x, s);
  CHECK(w[1] == doctest::Approx(0.99));
  CHECK(w[3] == doctest::Approx(0.01));

  Rng rng(2);
  const std::vector<Coalition> one = {s};
  const Matrix draws = sampler.sample(x, one, 20000, rng);
  std::size_t near_one = 0;
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    for (std::size_t i = 5; i < 20; ++i) CHECK(draws(r, static_cast<Eigen::Index>(i)) == 1.0);
    near_one += std::abs(draws(r, 0) - 1.0) < 0.1;
  }
  CHECK(static_cast<double>(near_one) / 20000 == doctest::Approx(0.99).epsilon(0.005));
}

TEST_CASE("full coalition reproduces x") {
  OutlierGenConfig cfg;
  const OutlierConditionalSampler sampler(cfg);
  Rng rng(3);
  const Vector x = onshap::testing::random_matrix(1, 20, rng).row(0).transpose();
  const std::vector<Coalition> one = {Coalition::full(20)};
  const Matrix draws = sampler.sample(x, one, 3, rng);
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(draws.row(r) == x.transpose());
}

TEST_CASE("component means") {
  OutlierGenConfig cfg;
  const OutlierConditionalSampler sampler(cfg);
  CHECK(sampler.component_mean(0, 0) == 0.0);
  CHECK(sampler.component_mean(1, 0) == 1.0);
  CHECK(sampler.component_mean(2, 0) == 1.0);
  CHECK(sampler.component_mean(3, 4) == 0.0);
  CHECK(sampler.component_mean(3, 5) == 1.0);
}
