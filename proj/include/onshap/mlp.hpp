#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "onshap/dense_net.hpp"
#include "onshap/model.hpp"
#include "onshap/training.hpp"

namespace onshap {

/// Softmax classifier on a dense network.
class MlpClassifier final : public Model {
 public:
  explicit MlpClassifier(DenseNet net);

  std::string kind() const override { return "mlp"; }
  std::size_t n_features() const override { return net_.input_size(); }
  std::size_t n_outputs() const override { return net_.output_size(); }

  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }

  nlohmann::json to_json() const override;
  static MlpClassifier from_json(const nlohmann::json& doc);

 protected:
  Matrix predict_unchecked(const Matrix& batch) const override { return net_.forward(batch); }

 private:
  DenseNet net_;
};

struct MlpConfig {
  std::vector<std::size_t> hidden = {50};
  TrainConfig train;
};

struct MlpFit {
  MlpClassifier model;
  TrainHistory history;
};

MlpFit fit_mlp(const Matrix& features, std::span<const int> labels, std::size_t n_classes,
               const Matrix& val_features, std::span<const int> val_labels, const MlpConfig& cfg);

double accuracy(const Model& model, const Matrix& features, std::span<const int> labels);

}  // namespace onshap
