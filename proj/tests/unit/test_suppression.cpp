#include <cmath>

#include "doctest.h"
#include "onshap/generators.hpp"
#include "onshap/metrics.hpp"
#include "onshap/suppression.hpp"
#include "test_support.hpp"

using namespace onshap;
using onshap::testing::LogisticModel;

namespace {

double pearson(const Matrix& x, Eigen::Index a, Eigen::Index b) {
  const auto ca = x.col(a).array() - x.col(a).mean();
  const auto cb = x.col(b).array() - x.col(b).mean();
  return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

}  // namespace

TEST_CASE("intervene overwrites one column only") {
  Rng rng(3);
  const Matrix batch = onshap::testing::random_matrix(7, 4, rng);
  const auto [zero, one] = intervene(batch, 2);
  CHECK((zero.col(2).array() == 0.0).all());
  CHECK((one.col(2).array() == 1.0).all());
  for (Eigen::Index c : {0, 1, 3}) {
    CHECK(zero.col(c) == batch.col(c));
    CHECK(one.col(c) == batch.col(c));
  }
  CHECK_THROWS(intervene(batch, 4));
}

TEST_CASE("intervention gap of a logistic model") {
  Rng rng(4);
  const Matrix batch = onshap::testing::random_binary(50, 3, rng);
  const LogisticModel m({0.5, -2.0, 1.0}, 0.3);
  double expected = 0.0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const double z = 0.3 + 0.5 * batch(r, 0) + 1.0 * batch(r, 2);
    expected += std::abs(1.0 / (1.0 + std::exp(-(z - 2.0))) - 1.0 / (1.0 + std::exp(-z))) / 50.0;
  }
  CHECK(mean_intervention_gap(m, batch, 1) == doctest::Approx(expected).epsilon(1e-12));
  // A feature the model ignores has no gap.
  CHECK(mean_intervention_gap(LogisticModel({0.5, 0.0, 1.0}, 0.3), batch, 1) == 0.0);
}

TEST_CASE("prediction agreement") {
  Rng rng(5);
  const Matrix batch = onshap::testing::random_matrix(40, 2, rng);
  const LogisticModel m({1.0, 1.0}, 0.0);
  CHECK(prediction_agreement(m, m, batch) == 1.0);
  CHECK(prediction_agreement(m, LogisticModel({-1.0, -1.0}, 0.0), batch) == 0.0);
}

TEST_CASE("fine-tuning shrinks the intervention gap and keeps predictions") {
  const Dataset d = gen_census_like(3000, 8);
  const Matrix train = d.rows(d.split.train), val = d.rows(d.split.validation);
  const auto train_y = d.labels_of(d.split.train), val_y = d.labels_of(d.split.validation);
  MlpConfig mc;
  mc.hidden = {16};
  mc.train.max_epochs = 40;
  mc.train.seed = 1;
  const MlpFit base = fit_mlp(train, train_y, 2, val, val_y, mc);
  SuppressionConfig sc;
  sc.feature = 0;
  sc.alpha = 3.0;
  sc.train = mc.train;
  sc.train.max_epochs = 40;
  sc.train.patience.reset();
  const SuppressionResult s = suppress_feature_finetune(base.model, train, train_y, val, val_y, sc);
  CHECK(s.gap_before == doctest::Approx(mean_intervention_gap(base.model, val, 0)));
  CHECK(s.gap_after == doctest::Approx(mean_intervention_gap(s.model, val, 0)));
  CHECK(s.gap_after < 0.2 * s.gap_before);
  CHECK(prediction_agreement(base.model, s.model, val) > 0.9);
}

TEST_CASE("property: stand-in generators keep their structure across seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset drug = gen_drug_like(2000, seed);
    CHECK(drug.n_features() == 10);
    CHECK(drug.n_classes == 2);
    CHECK(((drug.features.array() == 0.0) || (drug.features.array() == 1.0)).all());
    double min_corr = 1.0;
    for (Eigen::Index a = 0; a < 10; ++a)
      for (Eigen::Index b = a + 1; b < 10; ++b) min_corr = std::min(min_corr, pearson(drug.features, a, b));
    CHECK(min_corr > 0.0);  // a shared propensity correlates every pair

    const Dataset census = gen_census_like(2000, seed);
    CHECK(census.feature_names().front() == "sex");
    CHECK(census.n_classes == 2);
    CHECK(((census.features.col(0).array() == 0.0) || (census.features.col(0).array() == 1.0)).all());
    CHECK(pearson(census.features, 0, 1) > 0.4);  // "husband" tracks sex
    CHECK((census.features.array() >= 0.0).all());
    CHECK((census.features.array() <= 1.0).all());
    const double positive = std::count(census.labels->begin(), census.labels->end(), 1) / 2000.0;
    CHECK(positive > 0.1);
    CHECK(positive < 0.5);
    CHECK(gen_census_like(2000, seed).fingerprint() == census.fingerprint());
  }
}
