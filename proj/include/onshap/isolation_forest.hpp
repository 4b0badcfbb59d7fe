#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "onshap/model.hpp"

namespace onshap {

struct IsolationForestConfig {
  std::size_t n_trees = 100;
  std::size_t subsample_size = 256;
  std::uint64_t seed = 0;
};

enum class IsolationOutput {
  raw_score,    // one output: anomaly score minus the decision offset; positive => outlier
  probability,  // two outputs: (1 - p, p), p = training-range min-max scaled score
};

/// Average path length of an unsuccessful BST search over n points; c(1) = 0, c(2) = 1.
double average_path_length(std::size_t n);

/// Isolation forest (random axis-aligned splits). The anomaly score is
/// s(x) = 2^(-E[h(x)] / c(psi)) with psi the subsample size.
class IsolationForest final : public Model {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;  // training points reaching a leaf
    bool is_leaf() const { return left < 0; }
  };
  using Tree = std::vector<Node>;

  IsolationForest(std::shared_ptr<const std::vector<Tree>> trees, std::size_t n_features,
                  std::size_t subsample_size);

  std::string kind() const override { return "isolation_forest"; }
  std::size_t n_features() const override { return n_features_; }
  std::size_t n_outputs() const override { return output_ == IsolationOutput::raw_score ? 1 : 2; }
  OutputKind output_kind() const override {
    return output_ == IsolationOutput::raw_score ? OutputKind::score : OutputKind::probability;
  }

  double path_length(const double* x) const;  // E[h(x)] over trees
  double anomaly_score(const double* x) const;
  Vector anomaly_scores(const Matrix& batch) const;

  /// Places the decision offset midway between the k-th and (k+1)-th largest
  /// training scores, k = round(contamination * n).
  void calibrate_offset(const Matrix& train, double contamination);
  void set_offset(double offset) { offset_ = offset; }
  double offset() const { return offset_; }

  void set_probability_range(const Matrix& train);
  void set_output(IsolationOutput output) { output_ = output; }
  IsolationOutput output() const { return output_; }
  /// Copy sharing the fitted trees, with a different output mode.
  IsolationForest with_output(IsolationOutput output) const;

  std::size_t subsample_size() const { return subsample_size_; }
  const std::vector<Tree>& trees() const { return *trees_; }

  nlohmann::json to_json() const override;
  static IsolationForest from_json(const nlohmann::json& doc);

 protected:
  Matrix predict_unchecked(const Matrix& batch) const override;

 private:
  std::shared_ptr<const std::vector<Tree>> trees_;
  std::size_t n_features_;
  std::size_t subsample_size_;
  double normaliser_;
  double offset_ = 0.5;
  double score_min_ = 0.0;
  double score_max_ = 1.0;
  IsolationOutput output_ = IsolationOutput::raw_score;
};

/// Subsample sizes larger than the data are clamped with a warning.
IsolationForest fit_isolation_forest(const Matrix& features, const IsolationForestConfig& cfg);

}  // namespace onshap
