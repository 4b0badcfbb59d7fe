#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "onshap/coalition.hpp"
#include "onshap/dataset.hpp"
#include "onshap/dense_net.hpp"
#include "onshap/model.hpp"
#include "onshap/training.hpp"

namespace onshap {

/// g_y(x_S): a dense network on masked inputs predicting every output slot of
/// the target model.
class Surrogate {
 public:
  Surrogate(DenseNet net, std::vector<ColumnSchema> schema, std::string target_fingerprint);

  std::size_t n_features() const { return net_.input_size(); }
  std::size_t n_outputs() const { return net_.output_size(); }
  const DenseNet& net() const { return net_; }
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const std::string& target_fingerprint() const { return target_fingerprint_; }

  /// Rows must already carry the mask sentinel in out-of-coalition slots.
  Matrix predict_masked(const Matrix& masked) const;
  Vector evaluate(const Vector& x, const Coalition& s) const;
  double evaluate(const Vector& x, const Coalition& s, int y) const;

  nlohmann::json to_json() const;
  static Surrogate from_json(const nlohmann::json& doc);

 private:
  DenseNet net_;
  std::vector<ColumnSchema> schema_;
  std::string target_fingerprint_;
};

struct SurrogateConfig {
  std::size_t hidden = 512;  // two hidden layers of this width
  TrainConfig train;
};

struct SurrogateFit {
  Surrogate surrogate;
  TrainHistory history;
  double validation_mse = 0.0;
};

/// Minimises E_x E_S mean_y |f_y(x) - g_y(mask(x, S))|^2 with coalitions drawn
/// fresh for every row in every epoch. Validation uses one fixed coalition per
/// validation row.
SurrogateFit train_surrogate(const Model& target, const Matrix& train_x, const Matrix& val_x,
                             const std::vector<ColumnSchema>& schema,
                             const std::string& target_fingerprint, const SurrogateConfig& cfg);

struct SurrogateGridPoint {
  std::size_t hidden = 0;
  double learning_rate = 0.0;
  double validation_mse = 0.0;
};

/// Trains every (hidden, learning rate) pair and keeps the lowest validation MSE.
SurrogateFit select_surrogate(const Model& target, const Matrix& train_x, const Matrix& val_x,
                              const std::vector<ColumnSchema>& schema,
                              const std::string& target_fingerprint,
                              const std::vector<std::size_t>& hidden_grid,
                              const std::vector<double>& lr_grid, const SurrogateConfig& base,
                              std::vector<SurrogateGridPoint>* trace = nullptr);

}  // namespace onshap
