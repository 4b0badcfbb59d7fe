#include "onshap/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace onshap {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (max_epochs < 1) throw UsageError("max_epochs must be at least 1");
  if (patience && *patience < 1) throw UsageError("patience must be at least 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience ? nlohmann::json(*patience) : nlohmann::json(nullptr)},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) { return from_json(doc, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.max_epochs = doc.value("max_epochs", c.max_epochs);
  if (doc.contains("patience")) {
    const auto& p = doc.at("patience");
    c.patience = p.is_null() ? std::nullopt : std::optional<std::size_t>(p.get<std::size_t>());
  }
  c.adam_beta1 = doc.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = doc.value("adam_beta2", c.adam_beta2);
  c.adam_eps = doc.value("adam_eps", c.adam_eps);
  c.seed = doc.value("seed", c.seed);
  return c;
}

Adam::Adam(std::vector<DenseNet*> nets, const TrainConfig& cfg)
    : nets_(std::move(nets)),
      lr_(cfg.learning_rate),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps) {
  for (const DenseNet* net : nets_) {
    m_.push_back(net->zero_gradients());
    v_.push_back(net->zero_gradients());
  }
}

void Adam::step(const std::vector<Gradients>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = eps_ * std::sqrt(c2);
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    auto& layers = nets_[k]->layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
      };
      update(layers[l].weights, m_[k].weights[l], v_[k].weights[l], grads[k].weights[l]);
      update(layers[l].bias, m_[k].biases[l], v_[k].biases[l], grads[k].biases[l]);
    }
  }
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

TrainHistory train_networks(const std::vector<DenseNet*>& nets, std::size_t n_rows,
                            const BatchObjective& objective, const ValidationObjective& validation,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (n_rows == 0) throw UsageError("cannot train on an empty dataset");
  Adam adam(nets, cfg);
  TrainHistory history;
  history.best_validation_loss = std::numeric_limits<double>::infinity();

  std::vector<DenseNet> best;
  best.reserve(nets.size());
  for (const DenseNet* net : nets) best.push_back(*net);

  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Gradients> grads;
  for (const DenseNet* net : nets) grads.push_back(net->zero_gradients());

  std::size_t last_finite_epoch = 0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = make_rng(cfg.seed, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    CompensatedSum epoch_loss;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n_rows; start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(n_rows, start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      for (auto& g : grads) g.set_zero();
      Rng batch_rng(derive_seed(cfg.seed, epoch, batch_index + 1));
      const double loss = objective(rows, batch_rng, grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("training loss diverged at epoch " + std::to_string(epoch),
                            last_finite_epoch);
      }
      epoch_loss.add(loss * static_cast<double>(rows.size()));
      adam.step(grads);
    }
    const double train_loss = epoch_loss.value() / static_cast<double>(n_rows);
    const double val_loss = validation ? validation() : train_loss;
    if (!std::isfinite(val_loss)) {
      throw TrainingError("validation loss diverged at epoch " + std::to_string(epoch),
                          last_finite_epoch);
    }
    last_finite_epoch = epoch;
    history.epochs.push_back({epoch, train_loss, val_loss});

    if (val_loss < history.best_validation_loss) {
      history.best_validation_loss = val_loss;
      history.best_epoch = epoch;
      for (std::size_t k = 0; k < nets.size(); ++k) best[k] = *nets[k];
      since_best = 0;
    } else if (cfg.patience && ++since_best >= *cfg.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < nets.size(); ++k) *nets[k] = best[k];
  return history;
}

TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets,
                   const Matrix& val_inputs, const Matrix& val_targets, OutputLoss loss,
                   const TrainConfig& cfg) {
  if (inputs.rows() != targets.rows()) throw ShapeError("inputs and targets differ in row count");
  auto objective = [&](std::span<const std::size_t> rows, Rng&, std::vector<Gradients>& grads) {
    const Matrix x = gather_rows(inputs, rows);
    const Matrix t = gather_rows(targets, rows);
    const ForwardTape tape = net.forward_tape(x);
    const LossEvaluation eval = loss(tape.output(), t);
    net.backward(tape, eval.d_output, grads[0]);
    return eval.mean();
  };
  ValidationObjective validation;
  if (val_inputs.rows() > 0) {
    validation = [&] { return loss(net.forward(val_inputs), val_targets).mean(); };
  }
  return train_networks({&net}, static_cast<std::size_t>(inputs.rows()), objective, validation,
                        cfg);
}

}  // namespace onshap
