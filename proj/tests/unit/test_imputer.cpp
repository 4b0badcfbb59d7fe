#include <cmath>

#include "doctest.h"
#include "onshap/imputer.hpp"
#include "onshap/surrogate.hpp"
#include "test_support.hpp"

using namespace onshap;

namespace {

std::vector<ColumnSchema> mixed_schema() {
  std::vector<ColumnSchema> schema(4);
  schema[0] = {"b", FeatureKind::binary, 2, {}, 0.0, 1.0};
  schema[1] = {"c", FeatureKind::categorical, 3, {}, 0.0, 1.0};
  schema[2] = {"x", FeatureKind::continuous, 0, {}, 0.0, 1.0};
  schema[3] = {"y", FeatureKind::continuous, 0, {}, 0.0, 1.0};
  return schema;
}

Matrix mixed_rows(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), 4);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = u(rng) < 0.5 ? 0.0 : 1.0;
    x(r, 1) = std::floor(3 * u(rng));
    x(r, 2) = u(rng);
    x(r, 3) = 0.5 * x(r, 2) + 0.25 * x(r, 0);
  }
  return x;
}

double worst_elbo_gradient_error(Imputer imp, const Matrix& x, const Matrix& masked, const Matrix& eps) {
  std::vector<Gradients> grads;
  for (DenseNet* net : imp.networks()) grads.push_back(net->zero_gradients());
  imp.elbo(x, masked, eps, &grads);
  double worst = 0.0;
  const auto nets = imp.networks();
  for (std::size_t n = 0; n < nets.size(); ++n) {
    for (std::size_t k = 0; k < nets[n]->parameter_count(); k += 3) {
      double& p = nets[n]->parameter(k);
      const double saved = p;
      p = saved + 1e-6;
      const double up = imp.elbo(x, masked, eps).mean_loss();
      p = saved - 1e-6;
      const double down = imp.elbo(x, masked, eps).mean_loss();
      p = saved;
      const double numeric = (up - down) / 2e-6;
      const double analytic = DenseNet::gradient_at(grads[n], k);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("kl and scale helpers") {
  RowVector mu1(2), s1(2), mu2(2), s2(2);
  mu1 << 0.3, 1.0;
  s1 << 0.5, 2.0;
  mu2 << -0.2, 0.0;
  s2 << 1.5, 1.0;
  CHECK(kl_diag_normals(mu1, s1, mu2, s2) == doctest::Approx(2.0165762192192753).epsilon(1e-12));
  CHECK(kl_to_standard_normal(mu1, s1) ==
        doctest::Approx(kl_diag_normals(mu1, s1, RowVector::Zero(2), RowVector::Ones(2))));
  CHECK(positive_scale(0.7) == doctest::Approx(1.103286048885458).epsilon(1e-12));
  CHECK(positive_scale_grad(0.7) ==
        doctest::Approx((positive_scale(0.7 + 1e-6) - positive_scale(0.7 - 1e-6)) / 2e-6).epsilon(1e-6));
}

TEST_CASE("mixture log density integrates to one in 1d") {
  GaussianMixture m;
  m.weights = RowVector(2);
  m.weights << 0.3, 0.7;
  m.means = {RowVector::Constant(1, -1.0), RowVector::Constant(1, 2.0)};
  m.scales = {RowVector::Constant(1, 0.5), RowVector::Constant(1, 1.2)};
  double total = 0.0;
  for (double z = -10; z < 12; z += 0.001) total += std::exp(m.log_density(RowVector::Constant(1, z))) * 0.001;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("elbo gradients match finite differences") {
  Rng rng(1);
  const Matrix x = mixed_rows(5, rng);
  std::vector<Coalition> coalitions;
  for (int k = 0; k < 5; ++k) coalitions.push_back(Coalition::from_bits(4, static_cast<std::uint64_t>(k * 3 % 16)));
  const Matrix masked = masked_rows(x, coalitions);
  for (std::size_t modes : {1, 3}) {
    ImputerHyper h;
    h.hidden = 6;
    h.latent_dim = 2;
    h.n_modes = modes;
    h.beta = 0.7;
    const Imputer imp(mixed_schema(), h, 4 + modes);
    std::normal_distribution<double> normal;
    Matrix eps(5, 2);
    for (Eigen::Index r = 0; r < 5; ++r) eps(r, 0) = normal(rng), eps(r, 1) = normal(rng);
    CHECK(worst_elbo_gradient_error(imp, x, masked, eps) < 1e-4);
  }
}

TEST_CASE("imputer keeps the conditioned features and round-trips") {
  Rng rng(2);
  const Matrix train = mixed_rows(400, rng), val = mixed_rows(100, rng);
  ImputerHyper h;
  h.hidden = 16;
  h.latent_dim = 2;
  h.train.max_epochs = 30;
  h.train.batch_size = 50;
  h.train.learning_rate = 3e-3;
  h.train.seed = 5;
  const ImputerFit fit = train_imputer(train, val, mixed_schema(), h);
  CHECK(fit.history.epochs.size() >= 2);
  CHECK(fit.history.epochs.back().train_loss < fit.history.epochs.front().train_loss);

  const Vector x = train.row(0).transpose();
  const Coalition s = Coalition::from_indices(4, {0, 2});
  const Matrix draws = fit.imputer->sample_conditional(x, s, 50, rng);
  for (Eigen::Index r = 0; r < draws.rows(); ++r) {
    CHECK(draws(r, 0) == x[0]);
    CHECK(draws(r, 2) == x[2]);
    CHECK((draws(r, 1) == 0.0 || draws(r, 1) == 1.0 || draws(r, 1) == 2.0));
  }
  const Imputer back = Imputer::from_json(nlohmann::json::parse(fit.imputer->to_json().dump()));
  CHECK(back.to_json() == fit.imputer->to_json());
  Rng a(9), b(9);
  CHECK(back.sample_conditional(x, s, 5, a) == fit.imputer->sample_conditional(x, s, 5, b));
  CHECK(train_imputer(train, val, mixed_schema(), h).imputer->to_json() == fit.imputer->to_json());
}

TEST_CASE("imputer hyperparameters validate and round-trip") {
  ImputerHyper h;
  h.latent_dim = 0;
  CHECK_THROWS_AS(h.validate(), UsageError);
  const ImputerHyper d;
  CHECK(ImputerHyper::from_json(d.to_json()).to_json() == d.to_json());
}

TEST_CASE("surrogate learns masked model outputs") {
  Rng rng(3);
  const Matrix train = onshap::testing::random_binary(600, 2, rng);
  const Matrix val = onshap::testing::random_binary(200, 2, rng);
  const onshap::testing::LogisticModel model({2.0, -1.0}, 0.0);
  std::vector<ColumnSchema> schema(2, ColumnSchema{"b", FeatureKind::binary, 2, {}, 0.0, 1.0});
  SurrogateConfig cfg;
  cfg.hidden = 16;
  cfg.train.max_epochs = 200;
  cfg.train.batch_size = 64;
  cfg.train.learning_rate = 1e-2;
  cfg.train.seed = 1;
  const SurrogateFit fit = train_surrogate(model, train, val, schema, "fp", cfg);
  // Oracle: with uniform independent binaries, v({}) is the mean of f over the 4 corners.
  double mean_corner = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Vector c(2);
      c << a, b;
      mean_corner += model.predict_row(c)[1] / 4;
    }
  Vector x(2);
  x << 1, 0;
  CHECK(fit.surrogate.evaluate(x, Coalition(2), 1) == doctest::Approx(mean_corner).epsilon(0.05));
  CHECK(fit.surrogate.evaluate(x, Coalition::full(2), 1) == doctest::Approx(model.predict_row(x)[1]).epsilon(0.05));
  const Surrogate back = Surrogate::from_json(nlohmann::json::parse(fit.surrogate.to_json().dump()));
  CHECK(back.target_fingerprint() == "fp");
  CHECK(back.evaluate(x, Coalition(2), 1) == fit.surrogate.evaluate(x, Coalition(2), 1));
}
