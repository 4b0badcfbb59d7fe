#include "onshap/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace onshap {
namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double proxy = -1.0;  // sum_k L_k^2 / W_L + sum_k R_k^2 / W_R; larger is better
};

struct Sample {
  double value;
  int label;
  double weight;
};

class CartBuilder {
 public:
  CartBuilder(const Matrix& x, std::span<const int> y, std::size_t n_classes,
              const TreeConfig& cfg, std::uint64_t seed)
      : x_(x), y_(y), n_classes_(n_classes), cfg_(cfg), rng_(seed) {
    const auto n_features = static_cast<std::size_t>(x.cols());
    switch (cfg.max_features) {
      case MaxFeatures::all:
        max_features_ = n_features;
        break;
      case MaxFeatures::sqrt:
        max_features_ = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
        break;
      case MaxFeatures::log2:
        max_features_ = static_cast<std::size_t>(std::log2(static_cast<double>(n_features)));
        break;
    }
    max_features_ = std::clamp<std::size_t>(max_features_, 1, std::max<std::size_t>(1, n_features));
  }

  int build(std::vector<std::size_t>& rows, std::vector<double>& weights, std::size_t depth) {
    std::vector<double> counts(n_classes_, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      counts[static_cast<std::size_t>(y_[rows[i]])] += weights[i];
    }
    const auto node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    const std::size_t nonzero =
        static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }));
    const bool depth_limited = cfg_.max_depth && depth >= *cfg_.max_depth;
    if (nonzero <= 1 || rows.size() < cfg_.min_samples_split || depth_limited) {
      make_leaf(node_index, counts);
      return node_index;
    }
    const SplitCandidate best = find_split(rows, weights);
    if (best.feature < 0) {
      make_leaf(node_index, counts);
      return node_index;
    }
    std::vector<std::size_t> left_rows, right_rows;
    std::vector<double> left_w, right_w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (x_(static_cast<Eigen::Index>(rows[i]), best.feature) <= best.threshold) {
        left_rows.push_back(rows[i]);
        left_w.push_back(weights[i]);
      } else {
        right_rows.push_back(rows[i]);
        right_w.push_back(weights[i]);
      }
    }
    rows.clear();
    rows.shrink_to_fit();
    weights.clear();
    weights.shrink_to_fit();
    nodes_[static_cast<std::size_t>(node_index)].feature = best.feature;
    nodes_[static_cast<std::size_t>(node_index)].threshold = best.threshold;
    const int left = build(left_rows, left_w, depth + 1);
    const int right = build(right_rows, right_w, depth + 1);
    nodes_[static_cast<std::size_t>(node_index)].left = left;
    nodes_[static_cast<std::size_t>(node_index)].right = right;
    return node_index;
  }

  std::vector<TreeNode> take_nodes() { return std::move(nodes_); }
  std::vector<double> take_counts() { return std::move(counts_); }

 private:
  void make_leaf(int node_index, const std::vector<double>& counts) {
    auto& node = nodes_[static_cast<std::size_t>(node_index)];
    node.value_offset = counts_.size();
    counts_.insert(counts_.end(), counts.begin(), counts.end());
  }

  SplitCandidate find_split(const std::vector<std::size_t>& rows,
                            const std::vector<double>& weights) {
    const auto n_features = static_cast<std::size_t>(x_.cols());
    std::vector<int> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);

    SplitCandidate best;
    std::vector<Sample> samples(rows.size());
    std::vector<double> left(n_classes_), right(n_classes_);
    std::size_t visited = 0;
    for (int feature : order) {
      if (visited >= max_features_ && best.feature >= 0) break;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        samples[i] = {x_(static_cast<Eigen::Index>(rows[i]), feature), y_[rows[i]], weights[i]};
      }
      std::sort(samples.begin(), samples.end(),
                [](const Sample& a, const Sample& b) { return a.value < b.value; });
      if (samples.front().value == samples.back().value) continue;  // constant here
      ++visited;

      std::fill(left.begin(), left.end(), 0.0);
      std::fill(right.begin(), right.end(), 0.0);
      double w_left = 0.0, w_right = 0.0;
      for (const auto& s : samples) {
        right[static_cast<std::size_t>(s.label)] += s.weight;
        w_right += s.weight;
      }
      for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const auto label = static_cast<std::size_t>(samples[i].label);
        left[label] += samples[i].weight;
        right[label] -= samples[i].weight;
        w_left += samples[i].weight;
        w_right -= samples[i].weight;
        if (samples[i].value == samples[i + 1].value) continue;
        double sum_left = 0.0, sum_right = 0.0;
        for (std::size_t k = 0; k < n_classes_; ++k) {
          sum_left += left[k] * left[k];
          sum_right += right[k] * right[k];
        }
        const double proxy = sum_left / w_left + sum_right / w_right;
        if (proxy > best.proxy) {
          double threshold = 0.5 * (samples[i].value + samples[i + 1].value);
          if (threshold >= samples[i + 1].value) threshold = samples[i].value;
          best = {feature, threshold, proxy};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t n_classes_;
  TreeConfig cfg_;
  Rng rng_;
  std::size_t max_features_ = 1;
  std::vector<TreeNode> nodes_;
  std::vector<double> counts_;
};

nlohmann::json node_to_json(const DecisionTree& tree, int index) {
  const auto& node = tree.nodes()[static_cast<std::size_t>(index)];
  if (node.is_leaf()) {
    const auto counts = tree.leaf_counts(node);
    return {{"counts", std::vector<double>(counts.begin(), counts.end())}};
  }
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"left", node_to_json(tree, node.left)},
          {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const nlohmann::json& doc, std::size_t n_classes, std::vector<TreeNode>& nodes,
                   std::vector<double>& counts) {
  const auto index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  if (doc.contains("counts")) {
    const auto c = doc.at("counts").get<std::vector<double>>();
    if (c.size() != n_classes) throw DataError("tree leaf has the wrong number of classes");
    nodes[static_cast<std::size_t>(index)].value_offset = counts.size();
    counts.insert(counts.end(), c.begin(), c.end());
    return index;
  }
  nodes[static_cast<std::size_t>(index)].feature = doc.at("feature").get<int>();
  nodes[static_cast<std::size_t>(index)].threshold = doc.at("threshold").get<double>();
  const int left = node_from_json(doc.at("left"), n_classes, nodes, counts);
  const int right = node_from_json(doc.at("right"), n_classes, nodes, counts);
  nodes[static_cast<std::size_t>(index)].left = left;
  nodes[static_cast<std::size_t>(index)].right = right;
  return index;
}

}  // namespace

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, std::vector<double> counts,
                           std::size_t n_features, std::size_t n_classes)
    : nodes_(std::move(nodes)), counts_(std::move(counts)), n_features_(n_features),
      n_classes_(n_classes) {
  if (nodes_.empty()) throw DataError("a tree needs at least one node");
}

std::span<const double> DecisionTree::leaf_counts(const TreeNode& leaf) const {
  return {counts_.data() + leaf.value_offset, n_classes_};
}

const TreeNode& DecisionTree::leaf_for(const double* x) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    node = &nodes_[static_cast<std::size_t>(x[node->feature] <= node->threshold ? node->left
                                                                                 : node->right)];
  }
  return *node;
}

void DecisionTree::accumulate_proba(const double* x, double* out) const {
  const TreeNode& leaf = leaf_for(x);
  const double* c = counts_.data() + leaf.value_offset;
  double total = 0.0;
  for (std::size_t k = 0; k < n_classes_; ++k) total += c[k];
  for (std::size_t k = 0; k < n_classes_; ++k) out[k] += c[k] / total;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (!nodes_[i].is_leaf()) {
      depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

Matrix DecisionTree::predict_unchecked(const Matrix& batch) const {
  Matrix out = Matrix::Zero(batch.rows(), static_cast<Eigen::Index>(n_classes_));
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    accumulate_proba(batch.row(r).data(), out.row(r).data());
  }
  return out;
}

nlohmann::json DecisionTree::nodes_to_json() const { return node_to_json(*this, 0); }

nlohmann::json DecisionTree::to_json() const {
  return {{"format", "onshap-model"},
          {"version", 1},
          {"kind", kind()},
          {"n_features", n_features_},
          {"n_classes", n_classes_},
          {"root", nodes_to_json()}};
}

DecisionTree DecisionTree::from_nodes_json(const nlohmann::json& root, std::size_t n_features,
                                           std::size_t n_classes) {
  std::vector<TreeNode> nodes;
  std::vector<double> counts;
  node_from_json(root, n_classes, nodes, counts);
  for (const auto& node : nodes) {
    if (!node.is_leaf() && (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features)) {
      throw DataError("tree split feature out of range");
    }
  }
  return DecisionTree(std::move(nodes), std::move(counts), n_features, n_classes);
}

DecisionTree DecisionTree::from_json(const nlohmann::json& doc) {
  return from_nodes_json(doc.at("root"), doc.at("n_features").get<std::size_t>(),
                         doc.at("n_classes").get<std::size_t>());
}

DecisionTree fit_decision_tree(const Matrix& features, std::span<const int> labels,
                               std::size_t n_classes, const TreeConfig& cfg, std::uint64_t seed,
                               std::span<const double> sample_weights) {
  if (features.rows() == 0) throw DataError("cannot fit a tree on empty data");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("features and labels differ in row count");
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw DataError("label " + std::to_string(label) + " out of range");
    }
  }
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
    if (w > 0) {
      rows.push_back(i);
      weights.push_back(w);
    }
  }
  if (rows.empty()) throw DataError("all sample weights are zero");
  CartBuilder builder(features, labels, n_classes, cfg, seed);
  builder.build(rows, weights, 0);
  return DecisionTree(builder.take_nodes(), builder.take_counts(),
                      static_cast<std::size_t>(features.cols()), n_classes);
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::size_t n_features,
                           std::size_t n_classes)
    : trees_(std::move(trees)), n_features_(n_features), n_classes_(n_classes) {
  if (trees_.empty()) throw DataError("a forest needs at least one tree");
}

Matrix RandomForest::predict_unchecked(const Matrix& batch) const {
  Matrix out = Matrix::Zero(batch.rows(), static_cast<Eigen::Index>(n_classes_));
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const double* x = batch.row(r).data();
    double* o = out.row(r).data();
    for (const auto& tree : trees_) tree.accumulate_proba(x, o);
  }
  out /= static_cast<double>(trees_.size());
  return out;
}

nlohmann::json RandomForest::to_json() const {
  auto trees = nlohmann::json::array();
  for (const auto& tree : trees_) trees.push_back(tree.nodes_to_json());
  return {{"format", "onshap-model"},
          {"version", 1},
          {"kind", kind()},
          {"n_features", n_features_},
          {"n_classes", n_classes_},
          {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& doc) {
  const auto n_features = doc.at("n_features").get<std::size_t>();
  const auto n_classes = doc.at("n_classes").get<std::size_t>();
  std::vector<DecisionTree> trees;
  for (const auto& root : doc.at("trees")) {
    trees.push_back(DecisionTree::from_nodes_json(root, n_features, n_classes));
  }
  return RandomForest(std::move(trees), n_features, n_classes);
}

RandomForest fit_random_forest(const Matrix& features, std::span<const int> labels,
                               std::size_t n_classes, const ForestConfig& cfg, std::uint64_t seed) {
  if (features.rows() == 0) throw DataError("cannot fit a random forest on empty data");
  if (cfg.n_trees == 0) throw UsageError("a forest needs at least one tree");
  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<std::optional<DecisionTree>> slots(cfg.n_trees);
  parallel_for(cfg.n_trees, [&](std::size_t t) {
    Rng rng = make_rng(seed, t + 1);
    std::vector<double> weights;
    if (cfg.bootstrap) {
      weights.assign(n, 0.0);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) weights[pick(rng)] += 1.0;
    }
    slots[t].emplace(fit_decision_tree(features, labels, n_classes, cfg.tree, rng(), weights));
  });
  std::vector<DecisionTree> trees;
  trees.reserve(cfg.n_trees);
  for (auto& slot : slots) trees.push_back(std::move(*slot));
  return RandomForest(std::move(trees), static_cast<std::size_t>(features.cols()), n_classes);
}

}  // namespace onshap
