#include "onshap/surrogate.hpp"

#include <optional>

namespace onshap {

Surrogate::Surrogate(DenseNet net, std::vector<ColumnSchema> schema,
                     std::string target_fingerprint)
    : net_(std::move(net)),
      schema_(std::move(schema)),
      target_fingerprint_(std::move(target_fingerprint)) {
  if (!schema_.empty() && schema_.size() != net_.input_size()) {
    throw ShapeError("surrogate schema does not match the network input width");
  }
}

Matrix Surrogate::predict_masked(const Matrix& masked) const {
  if (static_cast<std::size_t>(masked.cols()) != n_features()) {
    throw ShapeError("surrogate expects " + std::to_string(n_features()) + " features, got " +
                     std::to_string(masked.cols()));
  }
  return net_.forward(masked);
}

Vector Surrogate::evaluate(const Vector& x, const Coalition& s) const {
  if (static_cast<std::size_t>(x.size()) != n_features() || s.n() != n_features()) {
    throw ShapeError("surrogate input does not match its feature count");
  }
  Matrix row(1, x.size());
  apply_mask(x.data(), s, row.data());
  return net_.forward(row).row(0).transpose();
}

double Surrogate::evaluate(const Vector& x, const Coalition& s, int y) const {
  return evaluate(x, s)[y];
}

nlohmann::json Surrogate::to_json() const {
  return {{"format", "onshap-surrogate"},
          {"version", 1},
          {"target_fingerprint", target_fingerprint_},
          {"schema", schema_to_json(schema_)},
          {"net", net_.to_json()}};
}

Surrogate Surrogate::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "onshap-surrogate" || doc.value("version", 0) != 1) {
    throw DataError("not a version-1 surrogate document");
  }
  return Surrogate(DenseNet::from_json(doc.at("net")), schema_from_json(doc.at("schema")),
                   doc.at("target_fingerprint").get<std::string>());
}

SurrogateFit train_surrogate(const Model& target, const Matrix& train_x, const Matrix& val_x,
                             const std::vector<ColumnSchema>& schema,
                             const std::string& target_fingerprint, const SurrogateConfig& cfg) {
  if (train_x.rows() == 0) throw DataError("surrogate training needs data");
  const auto n = static_cast<std::size_t>(train_x.cols());
  const Matrix targets = target.predict(train_x);
  const Activation head =
      target.output_kind() == OutputKind::probability ? Activation::softmax : Activation::identity;
  DenseNet net({n, cfg.hidden, cfg.hidden, target.n_outputs()}, head,
               derive_seed(cfg.train.seed, 0x5e4));

  auto objective = [&](std::span<const std::size_t> rows, Rng& rng, std::vector<Gradients>& grads) {
    Matrix masked(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Coalition s = sample_shapley_coalition(n, rng);
      apply_mask(train_x.row(static_cast<Eigen::Index>(rows[k])).data(), s,
                 masked.row(static_cast<Eigen::Index>(k)).data());
    }
    const ForwardTape tape = net.forward_tape(masked);
    const LossEvaluation eval = squared_error_loss(tape.output(), gather_rows(targets, rows));
    net.backward(tape, eval.d_output, grads[0]);
    return eval.mean();
  };

  Matrix val_masked, val_targets;
  ValidationObjective validation;
  if (val_x.rows() > 0) {
    val_targets = target.predict(val_x);
    val_masked.resize(val_x.rows(), val_x.cols());
    Rng rng = make_rng(cfg.train.seed, 0xa11da7e);
    for (Eigen::Index r = 0; r < val_x.rows(); ++r) {
      apply_mask(val_x.row(r).data(), sample_shapley_coalition(n, rng), val_masked.row(r).data());
    }
    validation = [&] { return squared_error_loss(net.forward(val_masked), val_targets).mean(); };
  }
  TrainHistory history = train_networks({&net}, static_cast<std::size_t>(train_x.rows()),
                                        objective, validation, cfg.train);
  const double val_mse = validation ? validation() : history.best_validation_loss;
  return {Surrogate(std::move(net), schema, target_fingerprint), std::move(history), val_mse};
}

SurrogateFit select_surrogate(const Model& target, const Matrix& train_x, const Matrix& val_x,
                              const std::vector<ColumnSchema>& schema,
                              const std::string& target_fingerprint,
                              const std::vector<std::size_t>& hidden_grid,
                              const std::vector<double>& lr_grid, const SurrogateConfig& base,
                              std::vector<SurrogateGridPoint>* trace) {
  if (hidden_grid.empty() || lr_grid.empty()) throw UsageError("empty surrogate grid");
  std::optional<SurrogateFit> best;
  for (std::size_t hidden : hidden_grid) {
    for (double lr : lr_grid) {
      SurrogateConfig cfg = base;
      cfg.hidden = hidden;
      cfg.train.learning_rate = lr;
      SurrogateFit fit = train_surrogate(target, train_x, val_x, schema, target_fingerprint, cfg);
      if (trace) trace->push_back({hidden, lr, fit.validation_mse});
      if (!best || fit.validation_mse < best->validation_mse) best.emplace(std::move(fit));
    }
  }
  return std::move(*best);
}

}  // namespace onshap
