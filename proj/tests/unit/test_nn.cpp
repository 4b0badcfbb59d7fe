#include <cmath>

#include "doctest.h"
#include "onshap/dense_net.hpp"
#include "onshap/mlp.hpp"
#include "onshap/model_io.hpp"
#include "onshap/training.hpp"
#include "test_support.hpp"

using namespace onshap;

namespace {

Matrix softmax_targets(std::size_t rows, std::size_t classes, Rng& rng) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(classes));
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, static_cast<Eigen::Index>(pick(rng))) = 1.0;
  return t;
}

// Central differences on every parameter; returns the worst relative error.
double worst_gradient_error(DenseNet net, const Matrix& x, const Matrix& targets, OutputLoss loss) {
  const GradientResult g = compute_gradients(net, x, targets, loss);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < net.parameter_count(); ++k) {
    double& p = net.parameter(k);
    const double saved = p;
    p = saved + h;
    const double up = loss(net.forward(x), targets).mean();
    p = saved - h;
    const double down = loss(net.forward(x), targets).mean();
    p = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = DenseNet::gradient_at(g.grads, k);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic)));
  }
  return worst;
}

}  // namespace

TEST_CASE("backprop matches finite differences") {
  Rng rng(3);
  const Matrix x = onshap::testing::random_matrix(7, 4, rng);
  SUBCASE("softmax + cross entropy") {
    DenseNet net({4, 6, 5, 3}, Activation::softmax, 1);
    CHECK(worst_gradient_error(net, x, softmax_targets(7, 3, rng), cross_entropy_loss) < 1e-5);
  }
  SUBCASE("identity + squared error") {
    DenseNet net({4, 8, 2}, Activation::identity, 2);
    CHECK(worst_gradient_error(net, x, onshap::testing::random_matrix(7, 2, rng), squared_error_loss) < 1e-5);
  }
  SUBCASE("sigmoid + squared error") {
    DenseNet net({4, 5, 3}, Activation::sigmoid, 4);
    CHECK(worst_gradient_error(net, x, onshap::testing::random_matrix(7, 3, rng, 0, 1), squared_error_loss) < 1e-5);
  }
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(4);
  const DenseNet net({3, 7, 2}, Activation::softmax, 5);
  Matrix x = onshap::testing::random_matrix(2, 3, rng);
  const Matrix t = softmax_targets(2, 2, rng);
  const ForwardTape tape = net.forward_tape(x);
  Gradients grads = net.zero_gradients();
  const Matrix dx = net.backward(tape, cross_entropy_loss(tape.output(), t).d_output, grads);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double saved = x(r, c);
      x(r, c) = saved + 1e-6;
      const double up = cross_entropy_loss(net.forward(x), t).mean();
      x(r, c) = saved - 1e-6;
      const double down = cross_entropy_loss(net.forward(x), t).mean();
      x(r, c) = saved;
      CHECK(dx(r, c) == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
    }
  }
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(5);
  const DenseNet net({5, 4, 6}, Activation::softmax, 9);
  const Matrix out = net.forward(onshap::testing::random_matrix(10, 5, rng, -50, 50));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    CHECK(out.row(r).sum() == doctest::Approx(1.0));
    CHECK(out.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("non-finite loss names the row") {
  const DenseNet net({2, 2}, Activation::identity, 1);
  Matrix x = Matrix::Zero(3, 2);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(compute_gradients(net, x, Matrix::Zero(3, 2), squared_error_loss), NumericError);
}

TEST_CASE("mlp learns xor and round-trips losslessly") {
  Matrix x(400, 2);
  std::vector<int> y(400);
  Rng rng(12);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index r = 0; r < 400; ++r) {
    const int a = coin(rng), b = coin(rng);
    x(r, 0) = a;
    x(r, 1) = b;
    y[static_cast<std::size_t>(r)] = a ^ b;
  }
  MlpConfig cfg;
  cfg.hidden = {16};
  cfg.train.learning_rate = 0.01;
  cfg.train.batch_size = 32;
  cfg.train.max_epochs = 300;
  cfg.train.seed = 3;
  const MlpFit fit = fit_mlp(x, y, 2, x, y, cfg);
  CHECK(accuracy(fit.model, x, y) == doctest::Approx(1.0));

  const ModelPtr back = model_from_json(fit.model.to_json());
  CHECK(back->to_json() == fit.model.to_json());
  CHECK(back->predict(x) == fit.model.predict(x));
  CHECK(model_fingerprint(*back) == model_fingerprint(fit.model));

  const MlpFit again = fit_mlp(x, y, 2, x, y, cfg);
  CHECK(again.model.to_json() == fit.model.to_json());
}

TEST_CASE("dense net json keeps every bit") {
  const DenseNet net({3, 4, 2}, Activation::sigmoid, 21);
  const DenseNet back = DenseNet::from_json(nlohmann::json::parse(net.to_json().dump()));
  CHECK(back == net);
}

TEST_CASE("early stopping restores the best epoch") {
  Rng rng(13);
  const Matrix x = onshap::testing::random_matrix(50, 3, rng);
  const Matrix t = onshap::testing::random_matrix(50, 1, rng);
  const Matrix vx = onshap::testing::random_matrix(20, 3, rng);
  const Matrix vt = onshap::testing::random_matrix(20, 1, rng);
  DenseNet net({3, 32, 1}, Activation::identity, 2);
  TrainConfig cfg;
  cfg.max_epochs = 80;
  cfg.patience = 5;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 10;
  const TrainHistory h = train(net, x, t, vx, vt, squared_error_loss, cfg);
  CHECK(h.best_epoch >= 1);
  CHECK(squared_error_loss(net.forward(vx), vt).mean() == doctest::Approx(h.best_validation_loss));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  const TrainConfig base;
  CHECK(TrainConfig::from_json(base.to_json()).to_json() == base.to_json());
}
