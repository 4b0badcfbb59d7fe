#include <cmath>

#include "doctest.h"
#include "onshap/metrics.hpp"
#include "onshap/shapley.hpp"
#include "onshap/value_functions.hpp"
#include "test_support.hpp"

using namespace onshap;
using onshap::testing::LogisticModel;

namespace {

ModelPtr logistic() { return std::make_shared<LogisticModel>(std::vector<double>{1.5, -2.0, 0.7}, 0.2); }

double f1(const Model& m, const Vector& x) { return m.predict_row(x)[1]; }

// Fixed-draw sampler: the out-of-coalition slots take the values of `fill`.
class FillSampler final : public ConditionalSampler {
 public:
  explicit FillSampler(Vector fill) : fill_(std::move(fill)) {}
  std::size_t n_features() const override { return static_cast<std::size_t>(fill_.size()); }
  std::string id() const override { return "fill"; }
  Matrix sample(const Vector& x, std::span<const Coalition> coalitions, std::size_t n_draws,
                Rng&) const override {
    Matrix out(static_cast<Eigen::Index>(coalitions.size() * n_draws), fill_.size());
    for (std::size_t k = 0; k < coalitions.size(); ++k) {
      for (std::size_t d = 0; d < n_draws; ++d) {
        for (Eigen::Index i = 0; i < fill_.size(); ++i) {
          out(static_cast<Eigen::Index>(k * n_draws + d), i) =
              coalitions[k].contains(static_cast<std::size_t>(i)) ? x[i] : fill_[i];
        }
      }
    }
    return out;
  }

 private:
  Vector fill_;
};

}  // namespace

TEST_CASE("off-manifold value is the exhaustive splice average") {
  const ModelPtr model = logistic();
  Rng rng(1);
  auto background = std::make_shared<const Matrix>(onshap::testing::random_matrix(20, 3, rng));
  const Vector x = Vector::Constant(3, 0.3);
  const OffManifoldVf v(model, background, x, 1, 1, true);
  const Coalition s = Coalition::from_indices(3, {0, 2});
  double expected = 0.0;
  for (Eigen::Index r = 0; r < background->rows(); ++r) {
    Vector spliced = background->row(r).transpose();
    spliced[0] = x[0];
    spliced[2] = x[2];
    expected += f1(*model, spliced) / 20.0;
  }
  CHECK(v.evaluate(s) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(v.evaluate(Coalition::full(3)) == doctest::Approx(f1(*model, x)).epsilon(1e-12));

  std::vector<double> out(1), var(1);
  const std::vector<Coalition> one = {s};
  v.evaluate_batch_with_variance(one, rng, out, var);
  CHECK(var[0] == 0.0);
}

TEST_CASE("sampled off-manifold values average to the exhaustive one") {
  const ModelPtr model = logistic();
  Rng rng(2);
  auto background = std::make_shared<const Matrix>(onshap::testing::random_matrix(10, 3, rng));
  const Vector x = Vector::Constant(3, -0.4);
  const OffManifoldVf exact(model, background, x, 0, 1, true);
  const OffManifoldVf sampled(model, background, x, 0, 4);
  const Coalition s = Coalition::from_indices(3, {1});
  RunningStats stats;
  for (int k = 0; k < 4000; ++k) stats.add(sampled.evaluate(s, rng));
  CHECK(std::abs(stats.mean() - exact.evaluate(s)) < 4 * stats.std_error());
}

TEST_CASE("empirical conditional averages rows that agree on S") {
  const ModelPtr model = logistic();
  Matrix bg(5, 3);
  bg << 0, 0, 1,  //
      0, 1, 1,    //
      1, 0, 0,    //
      1, 1, 1,    //
      1, 1, 0;
  auto ctx = std::make_shared<EmpiricalConditionalContext>(model, bg);
  Vector x(3);
  x << 1, 1, 0;
  const EmpiricalConditionalVf v(ctx, x, 1);
  const Coalition s = Coalition::from_indices(3, {0});
  const double expected =
      (f1(*model, bg.row(2).transpose()) + f1(*model, bg.row(3).transpose()) + f1(*model, bg.row(4).transpose())) / 3;
  CHECK(v.evaluate(s) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(v.evaluate(Coalition::full(3)) == doctest::Approx(f1(*model, bg.row(4).transpose())).epsilon(1e-12));
  double mean_all = 0.0;
  for (Eigen::Index r = 0; r < 5; ++r) mean_all += f1(*model, bg.row(r).transpose()) / 5;
  CHECK(v.evaluate(Coalition(3)) == doctest::Approx(mean_all).epsilon(1e-12));
  CHECK(ctx->fallback_count() == 0);

  // No row matches x on {1, 2} = (0, 1) except row 0; (1, 0) is absent -> nearest rows.
  Vector z(3);
  z << 0, 1, 0;
  const EmpiricalConditionalVf w(ctx, z, 1);
  w.evaluate(Coalition::from_indices(3, {0, 1, 2}));
  CHECK(ctx->fallback_count() == 1);
}

TEST_CASE("sampler value function uses the sampled completions") {
  const ModelPtr model = logistic();
  Vector fill(3);
  fill << 0.5, 0.5, 0.5;
  auto sampler = std::make_shared<FillSampler>(fill);
  const Vector x = Vector::Constant(3, 2.0);
  const SamplerVf v(model, sampler, x, 1, 3);
  Vector expected_point(3);
  expected_point << 2.0, 0.5, 0.5;
  CHECK(v.evaluate(Coalition::from_indices(3, {0})) == doctest::Approx(f1(*model, expected_point)));
  Rng rng(3);
  std::vector<double> out(1), var(1);
  const std::vector<Coalition> one = {Coalition(3)};
  v.evaluate_batch_with_variance(one, rng, out, var);
  CHECK(var[0] == doctest::Approx(0.0));
}

TEST_CASE("retraining game: empty coalition scores the label collision rate") {
  Rng rng(4);
  const Matrix train = onshap::testing::random_binary(40, 2, rng);
  const Matrix test = onshap::testing::random_binary(10, 2, rng);
  const std::vector<int> train_y(40, 0);
  const std::vector<int> test_y = {0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
  ModelTrainer constant = [](const Matrix& x, std::span<const int>, std::uint64_t) -> ModelPtr {
    return std::make_shared<LogisticModel>(std::vector<double>(static_cast<std::size_t>(x.cols()), 0.0), 0.0);
  };
  const auto path = onshap::testing::temp_dir("retraining") / "cache.jsonl";
  auto cache = std::make_shared<RetrainingCache>(path);
  const RetrainingGame game(train, train_y, test, test_y, 2, constant, 9, "fp", cache);
  CHECK(game.evaluate(Coalition(2)) == doctest::Approx(0.09 + 0.49));
  CHECK(game.evaluate(Coalition::full(2)) == doctest::Approx(0.5));
  game.prefetch_all();
  CHECK(game.fits_performed() == 3);

  RetrainingCache reloaded(path);
  CHECK(reloaded.size() == 4);
  const RetrainingGame again(train, train_y, test, test_y, 2, constant, 9, "fp",
                             std::make_shared<RetrainingCache>(path));
  again.prefetch_all();
  CHECK(again.fits_performed() == 0);
}

TEST_CASE("value function mse is zero for the model itself and debiased for sampled vfs") {
  const ModelPtr model = logistic();
  Rng rng(5);
  const Matrix points = onshap::testing::random_matrix(50, 3, rng);
  auto background = std::make_shared<const Matrix>(onshap::testing::random_matrix(8, 3, rng));

  VfFactory perfect = [&](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<GameValueFunction>(3, [model, x, y](const Coalition&) { return model->predict_row(x)[y]; });
  };
  CHECK(value_function_mse(*model, perfect, points, 500, 1).mse == doctest::Approx(0.0));

  VfFactory exhaustive = [&](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<OffManifoldVf>(model, background, x, y, 1, true);
  };
  const MseReport truth = value_function_mse(*model, exhaustive, points, 20000, 2);
  const MseReport sampled = value_function_mse(*model, off_manifold_factory(model, background, 4), points, 20000, 2);
  CHECK(std::abs(sampled.mse - truth.mse) < 4 * std::hypot(sampled.std_error, truth.std_error));
}

TEST_CASE("method names round-trip") {
  for (VfMethod m : {VfMethod::off_manifold, VfMethod::empirical_conditional, VfMethod::generative,
                     VfMethod::surrogate, VfMethod::retraining}) {
    CHECK(vf_method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(vf_method_from_string("nope"), UsageError);
}
