#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "onshap/common.hpp"
#include "onshap/dense_net.hpp"

namespace onshap {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::optional<std::size_t> patience;  // early stopping on validation loss
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys missing from `doc` keep the values of `defaults`.
  static TrainConfig from_json(const nlohmann::json& doc, const TrainConfig& defaults);
  static TrainConfig from_json(const nlohmann::json& doc);
};

/// Adam over a group of networks that are optimised jointly.
class Adam {
 public:
  Adam(std::vector<DenseNet*> nets, const TrainConfig& cfg);
  void step(const std::vector<Gradients>& grads);

 private:
  std::vector<DenseNet*> nets_;
  std::vector<Gradients> m_;
  std::vector<Gradients> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
};

/// Computes the mean loss of the rows in `batch_rows`, adding its gradient into
/// `grads` (one entry per network, zeroed by the caller). `rng` is derived from
/// (seed, epoch, batch) so the objective may draw noise reproducibly.
using BatchObjective =
    std::function<double(std::span<const std::size_t> batch_rows, Rng& rng,
                         std::vector<Gradients>& grads)>;
using ValidationObjective = std::function<double()>;

/// Minibatch Adam with per-epoch reshuffling. Returns with every network set to
/// its parameters from the epoch of minimum validation loss. If no validation
/// objective is given, the epoch's mean training loss is monitored instead.
TrainHistory train_networks(const std::vector<DenseNet*>& nets, std::size_t n_rows,
                            const BatchObjective& objective, const ValidationObjective& validation,
                            const TrainConfig& cfg);

/// Single-network supervised training against fixed targets.
TrainHistory train(DenseNet& net, const Matrix& inputs, const Matrix& targets,
                   const Matrix& val_inputs, const Matrix& val_targets, OutputLoss loss,
                   const TrainConfig& cfg);

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows);

}  // namespace onshap
