#include "onshap/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace onshap {
namespace {

constexpr double kEulerGamma = 0.5772156649015329;

using Node = IsolationForest::Node;

int grow(const Matrix& x, std::vector<std::size_t>& rows, std::size_t depth,
         std::size_t height_limit, Rng& rng, std::vector<Node>& nodes) {
  const auto index = static_cast<int>(nodes.size());
  nodes.push_back(Node{});
  nodes.back().size = rows.size();
  if (depth >= height_limit || rows.size() <= 1) return index;

  // Only features that vary within the node can split it.
  std::vector<int> candidates;
  std::vector<std::pair<double, double>> ranges;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    double lo = x(static_cast<Eigen::Index>(rows[0]), f), hi = lo;
    for (std::size_t r : rows) {
      const double v = x(static_cast<Eigen::Index>(r), f);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi > lo) {
      candidates.push_back(static_cast<int>(f));
      ranges.emplace_back(lo, hi);
    }
  }
  if (candidates.empty()) return index;
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
  const int feature = candidates[pick];
  const auto [lo, hi] = ranges[pick];
  double threshold = std::uniform_real_distribution<double>(lo, hi)(rng);
  if (threshold <= lo) threshold = std::nextafter(lo, hi);

  std::vector<std::size_t> left, right;
  for (std::size_t r : rows) {
    (x(static_cast<Eigen::Index>(r), feature) < threshold ? left : right).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  nodes[static_cast<std::size_t>(index)].feature = feature;
  nodes[static_cast<std::size_t>(index)].threshold = threshold;
  const int l = grow(x, left, depth + 1, height_limit, rng, nodes);
  const int r = grow(x, right, depth + 1, height_limit, rng, nodes);
  nodes[static_cast<std::size_t>(index)].left = l;
  nodes[static_cast<std::size_t>(index)].right = r;
  return index;
}

nlohmann::json node_to_json(const std::vector<Node>& tree, int index) {
  const Node& node = tree[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return {{"size", node.size}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"size", node.size},
          {"left", node_to_json(tree, node.left)},
          {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const nlohmann::json& doc, std::vector<Node>& tree) {
  const auto index = static_cast<int>(tree.size());
  tree.push_back(Node{});
  tree.back().size = doc.at("size").get<std::size_t>();
  if (!doc.contains("feature")) return index;
  const int left = node_from_json(doc.at("left"), tree);
  const int right = node_from_json(doc.at("right"), tree);
  Node& node = tree[static_cast<std::size_t>(index)];
  node.feature = doc.at("feature").get<int>();
  node.threshold = doc.at("threshold").get<double>();
  node.left = left;
  node.right = right;
  return index;
}

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + kEulerGamma) - 2.0 * (m - 1.0) / m;
}

IsolationForest::IsolationForest(std::shared_ptr<const std::vector<Tree>> trees,
                                 std::size_t n_features, std::size_t subsample_size)
    : trees_(std::move(trees)),
      n_features_(n_features),
      subsample_size_(subsample_size),
      normaliser_(average_path_length(subsample_size)) {
  if (!trees_ || trees_->empty()) throw DataError("an isolation forest needs at least one tree");
  if (normaliser_ <= 0.0) normaliser_ = 1.0;
}

double IsolationForest::path_length(const double* x) const {
  double total = 0.0;
  for (const auto& tree : *trees_) {
    const Node* node = &tree.front();
    std::size_t edges = 0;
    while (!node->is_leaf()) {
      node = &tree[static_cast<std::size_t>(x[node->feature] < node->threshold ? node->left
                                                                                : node->right)];
      ++edges;
    }
    total += static_cast<double>(edges) + average_path_length(node->size);
  }
  return total / static_cast<double>(trees_->size());
}

double IsolationForest::anomaly_score(const double* x) const {
  return std::exp2(-path_length(x) / normaliser_);
}

Vector IsolationForest::anomaly_scores(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != n_features_) {
    throw ShapeError("isolation forest expects " + std::to_string(n_features_) + " features");
  }
  Vector out(batch.rows());
  for (Eigen::Index r = 0; r < batch.rows(); ++r) out[r] = anomaly_score(batch.row(r).data());
  return out;
}

void IsolationForest::calibrate_offset(const Matrix& train, double contamination) {
  if (!(contamination > 0.0 && contamination < 1.0)) {
    throw UsageError("contamination must lie in (0, 1)");
  }
  Vector scores = anomaly_scores(train);
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::llround(contamination * static_cast<double>(sorted.size())));
  if (k == 0 || k >= sorted.size()) throw UsageError("contamination leaves an empty class");
  offset_ = 0.5 * (sorted[k - 1] + sorted[k]);
}

void IsolationForest::set_probability_range(const Matrix& train) {
  const Vector scores = anomaly_scores(train);
  score_min_ = scores.minCoeff();
  score_max_ = scores.maxCoeff();
}

IsolationForest IsolationForest::with_output(IsolationOutput output) const {
  IsolationForest copy = *this;
  copy.output_ = output;
  return copy;
}

Matrix IsolationForest::predict_unchecked(const Matrix& batch) const {
  const Vector scores = anomaly_scores(batch);
  if (output_ == IsolationOutput::raw_score) {
    return (scores.array() - offset_).matrix();
  }
  Matrix out(batch.rows(), 2);
  const double span = score_max_ > score_min_ ? score_max_ - score_min_ : 1.0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    const double p = std::clamp((scores[r] - score_min_) / span, 0.0, 1.0);
    out(r, 0) = 1.0 - p;
    out(r, 1) = p;
  }
  return out;
}

nlohmann::json IsolationForest::to_json() const {
  auto trees = nlohmann::json::array();
  for (const auto& tree : *trees_) trees.push_back(node_to_json(tree, 0));
  return {{"format", "onshap-model"},
          {"version", 1},
          {"kind", kind()},
          {"n_features", n_features_},
          {"subsample_size", subsample_size_},
          {"offset", offset_},
          {"score_range", {score_min_, score_max_}},
          {"output", output_ == IsolationOutput::raw_score ? "raw_score" : "probability"},
          {"trees", std::move(trees)}};
}

IsolationForest IsolationForest::from_json(const nlohmann::json& doc) {
  auto trees = std::make_shared<std::vector<Tree>>();
  for (const auto& t : doc.at("trees")) {
    Tree tree;
    node_from_json(t, tree);
    trees->push_back(std::move(tree));
  }
  IsolationForest forest(std::move(trees), doc.at("n_features").get<std::size_t>(),
                         doc.at("subsample_size").get<std::size_t>());
  forest.offset_ = doc.at("offset").get<double>();
  forest.score_min_ = doc.at("score_range").at(0).get<double>();
  forest.score_max_ = doc.at("score_range").at(1).get<double>();
  forest.output_ = doc.at("output").get<std::string>() == "raw_score" ? IsolationOutput::raw_score
                                                                      : IsolationOutput::probability;
  return forest;
}

IsolationForest fit_isolation_forest(const Matrix& features, const IsolationForestConfig& cfg) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw DataError("cannot fit an isolation forest on empty data");
  if (cfg.n_trees == 0) throw UsageError("an isolation forest needs at least one tree");
  std::size_t psi = cfg.subsample_size;
  if (psi > n) {
    warn("isolation forest subsample size " + std::to_string(psi) + " exceeds the " +
         std::to_string(n) + " available points; clamping");
    psi = n;
  }
  const auto height_limit = static_cast<std::size_t>(std::ceil(std::log2(std::max<double>(2.0, psi))));
  auto trees = std::make_shared<std::vector<IsolationForest::Tree>>(cfg.n_trees);
  parallel_for(cfg.n_trees, [&](std::size_t t) {
    Rng rng = make_rng(cfg.seed, t + 1);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates: first psi entries form the subsample.
    for (std::size_t i = 0; i < psi; ++i) {
      std::swap(all[i], all[std::uniform_int_distribution<std::size_t>(i, n - 1)(rng)]);
    }
    all.resize(psi);
    grow(features, all, 0, height_limit, rng, (*trees)[t]);
  });
  IsolationForest forest(std::move(trees), static_cast<std::size_t>(features.cols()), psi);
  forest.set_probability_range(features);
  return forest;
}

}  // namespace onshap
