#include "onshap/mlp.hpp"

#include "onshap/dataset.hpp"

namespace onshap {

MlpClassifier::MlpClassifier(DenseNet net) : net_(std::move(net)) {
  if (net_.output_activation() != Activation::softmax) {
    throw UsageError("an MLP classifier needs a softmax output layer");
  }
}

nlohmann::json MlpClassifier::to_json() const {
  return {{"format", "onshap-model"}, {"version", 1}, {"kind", kind()}, {"net", net_.to_json()}};
}

MlpClassifier MlpClassifier::from_json(const nlohmann::json& doc) {
  return MlpClassifier(DenseNet::from_json(doc.at("net")));
}

MlpFit fit_mlp(const Matrix& features, std::span<const int> labels, std::size_t n_classes,
               const Matrix& val_features, std::span<const int> val_labels, const MlpConfig& cfg) {
  if (features.rows() == 0) throw DataError("cannot fit an MLP on empty data");
  std::vector<std::size_t> sizes{static_cast<std::size_t>(features.cols())};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(n_classes);
  DenseNet net(sizes, Activation::softmax, derive_seed(cfg.train.seed, 0x1417));
  const Matrix targets = one_hot(labels, n_classes);
  const Matrix val_targets = one_hot(val_labels, n_classes);
  TrainHistory history =
      train(net, features, targets, val_features, val_targets, cross_entropy_loss, cfg.train);
  return {MlpClassifier(std::move(net)), std::move(history)};
}

double accuracy(const Model& model, const Matrix& features, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const Matrix probs = model.predict(features);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace onshap
