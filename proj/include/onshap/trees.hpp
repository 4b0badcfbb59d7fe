#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "onshap/model.hpp"

namespace onshap {

/// Node of a flat binary tree. Internal nodes send x[feature] <= threshold to
/// the left child. Leaves (left < 0) own `n_classes` entries of the tree's
/// count array starting at value_offset.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t value_offset = 0;

  bool is_leaf() const { return left < 0; }
};

enum class MaxFeatures { all, sqrt, log2 };

struct TreeConfig {
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
  MaxFeatures max_features = MaxFeatures::all;
};

/// CART classification tree (Gini impurity); leaves hold weighted class counts.
class DecisionTree final : public Model {
 public:
  DecisionTree(std::vector<TreeNode> nodes, std::vector<double> counts, std::size_t n_features,
               std::size_t n_classes);

  std::string kind() const override { return "decision_tree"; }
  std::size_t n_features() const override { return n_features_; }
  std::size_t n_outputs() const override { return n_classes_; }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::span<const double> leaf_counts(const TreeNode& leaf) const;
  const TreeNode& leaf_for(const double* x) const;
  /// Adds the leaf's class probabilities for x into out[0..n_classes).
  void accumulate_proba(const double* x, double* out) const;
  std::size_t depth() const;

  nlohmann::json to_json() const override;
  nlohmann::json nodes_to_json() const;
  static DecisionTree from_json(const nlohmann::json& doc);
  static DecisionTree from_nodes_json(const nlohmann::json& root, std::size_t n_features,
                                      std::size_t n_classes);

 protected:
  Matrix predict_unchecked(const Matrix& batch) const override;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> counts_;
  std::size_t n_features_;
  std::size_t n_classes_;
};

/// `sample_weights` (optional) are per-row multiplicities, e.g. bootstrap counts.
DecisionTree fit_decision_tree(const Matrix& features, std::span<const int> labels,
                               std::size_t n_classes, const TreeConfig& cfg, std::uint64_t seed,
                               std::span<const double> sample_weights = {});

struct ForestConfig {
  std::size_t n_trees = 100;
  bool bootstrap = true;
  TreeConfig tree;
};

/// Bagged CART trees; probabilities are the mean of the trees' leaf frequencies.
class RandomForest final : public Model {
 public:
  RandomForest(std::vector<DecisionTree> trees, std::size_t n_features, std::size_t n_classes);

  std::string kind() const override { return "random_forest"; }
  std::size_t n_features() const override { return n_features_; }
  std::size_t n_outputs() const override { return n_classes_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  nlohmann::json to_json() const override;
  static RandomForest from_json(const nlohmann::json& doc);

 protected:
  Matrix predict_unchecked(const Matrix& batch) const override;

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_features_;
  std::size_t n_classes_;
};

/// Per-tree seeds derive from `seed`, so the result does not depend on threading.
RandomForest fit_random_forest(const Matrix& features, std::span<const int> labels,
                               std::size_t n_classes, const ForestConfig& cfg, std::uint64_t seed);

}  // namespace onshap
