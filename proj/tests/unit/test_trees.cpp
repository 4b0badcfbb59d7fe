#include <cmath>

#include "doctest.h"
#include "onshap/isolation_forest.hpp"
#include "onshap/mlp.hpp"
#include "onshap/model_io.hpp"
#include "onshap/trees.hpp"
#include "test_support.hpp"

using namespace onshap;

TEST_CASE("cart splits a threshold problem exactly") {
  Matrix x(8, 2);
  x << 0, 5, 1, 4, 2, 3, 3, 2, 4, 1, 5, 0, 6, 9, 7, 8;
  const std::vector<int> y = {0, 0, 0, 0, 1, 1, 1, 1};
  const DecisionTree tree = fit_decision_tree(x, y, 2, TreeConfig{}, 1);
  CHECK(accuracy(tree, x, y) == 1.0);
  CHECK(tree.depth() == 1);
  const TreeNode& root = tree.nodes().front();
  CHECK(root.feature == 0);
  CHECK(root.threshold == doctest::Approx(3.5));
}

TEST_CASE("leaf probabilities are class frequencies") {
  Matrix x(6, 1);
  x << 0, 0, 0, 1, 1, 1;
  const std::vector<int> y = {0, 0, 1, 1, 1, 1};
  TreeConfig cfg;
  cfg.max_depth = 1;
  const DecisionTree tree = fit_decision_tree(x, y, 2, cfg, 0);
  const Matrix p = tree.predict(x);
  CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(p(5, 1) == doctest::Approx(1.0));
}

TEST_CASE("forest learns xor and serialises losslessly") {
  Rng rng(1);
  const Matrix x = onshap::testing::random_binary(300, 3, rng);
  std::vector<int> y(300);
  for (Eigen::Index r = 0; r < 300; ++r) y[static_cast<std::size_t>(r)] = static_cast<int>(x(r, 0)) ^ static_cast<int>(x(r, 1));
  ForestConfig cfg;
  cfg.n_trees = 20;
  const RandomForest forest = fit_random_forest(x, y, 2, cfg, 4);
  CHECK(accuracy(forest, x, y) == 1.0);
  const ModelPtr back = model_from_json(nlohmann::json::parse(forest.to_json().dump()));
  CHECK(back->predict(x) == forest.predict(x));
  CHECK(fit_random_forest(x, y, 2, cfg, 4).to_json() == forest.to_json());
  const Matrix p = forest.predict(x);
  for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
}

TEST_CASE("average path length") {
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  CHECK(average_path_length(3) == doctest::Approx(1.207392357589623).epsilon(1e-12));
  CHECK(average_path_length(256) == doctest::Approx(10.244770920119917).epsilon(1e-12));
}

TEST_CASE("isolation forest ranks planted outliers first") {
  Rng rng(2);
  Matrix x = onshap::testing::random_matrix(1000, 4, rng, 0.0, 0.1);
  for (Eigen::Index r = 0; r < 10; ++r) x.row(r).setConstant(3.0 + static_cast<double>(r));
  IsolationForest forest = fit_isolation_forest(x, {100, 256, 7});
  forest.calibrate_offset(x, 0.01);
  const Matrix raw = forest.predict(x);
  for (Eigen::Index r = 0; r < 1000; ++r) CHECK((raw(r, 0) > 0) == (r < 10));
  for (Eigen::Index r = 0; r < 1000; ++r) {
    const double s = forest.anomaly_score(x.row(r).data());
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
  }
  for (const auto& tree : forest.trees()) {
    for (const auto& node : tree) CHECK((node.is_leaf() || node.feature >= 0));
  }
}

TEST_CASE("isolation forest output modes and json") {
  Rng rng(3);
  const Matrix x = onshap::testing::random_matrix(300, 3, rng);
  IsolationForest forest = fit_isolation_forest(x, {50, 128, 1});
  forest.calibrate_offset(x, 0.05);
  forest.set_probability_range(x);
  const IsolationForest prob = forest.with_output(IsolationOutput::probability);
  CHECK(prob.n_outputs() == 2);
  const Matrix p = prob.predict(x);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    CHECK(p.row(r).sum() == doctest::Approx(1.0));
    CHECK(p(r, 1) >= -1e-12);
    CHECK(p(r, 1) <= 1.0 + 1e-12);
  }
  const IsolationForest back = IsolationForest::from_json(nlohmann::json::parse(forest.to_json().dump()));
  CHECK(back.predict(x) == forest.predict(x));
  CHECK(back.offset() == forest.offset());
  CHECK(fit_isolation_forest(x, {50, 128, 1}).to_json() != fit_isolation_forest(x, {50, 128, 2}).to_json());
}

TEST_CASE("tree depth respects the isolation height limit") {
  Rng rng(4);
  const Matrix x = onshap::testing::random_matrix(2000, 2, rng);
  const IsolationForest forest = fit_isolation_forest(x, {10, 256, 3});
  for (const auto& tree : forest.trees()) {
    std::vector<std::pair<int, int>> stack = {{0, 0}};
    while (!stack.empty()) {
      auto [node, depth] = stack.back();
      stack.pop_back();
      CHECK(depth <= 8);
      const auto& n = tree[static_cast<std::size_t>(node)];
      if (!n.is_leaf()) {
        stack.push_back({n.left, depth + 1});
        stack.push_back({n.right, depth + 1});
      }
    }
  }
}
