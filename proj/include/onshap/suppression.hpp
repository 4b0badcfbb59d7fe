#pragma once

#include <cstddef>
#include <span>

#include "onshap/mlp.hpp"
#include "onshap/training.hpp"

namespace onshap {

/// Copies of `batch` with column `feature` set to 0 and to 1.
std::pair<Matrix, Matrix> intervene(const Matrix& batch, std::size_t feature);

/// Mean over rows of 1/2 * sum_c |f_c(x | do(feature=1)) - f_c(x | do(feature=0))|.
/// For two classes this is |f_1(do=1) - f_1(do=0)|.
double mean_intervention_gap(const Model& model, const Matrix& features, std::size_t feature);

/// Fraction of rows on which the two models predict the same argmax class.
double prediction_agreement(const Model& a, const Model& b, const Matrix& features);

struct SuppressionConfig {
  std::size_t feature = 0;
  double alpha = 3.0;
  TrainConfig train;  // max_epochs is the fine-tuning budget
};

struct SuppressionResult {
  MlpClassifier model;
  TrainHistory history;
  double gap_before = 0.0;  // mean_intervention_gap on the validation rows
  double gap_after = 0.0;
};

/// Fine-tunes a copy of `base` on cross-entropy + alpha * intervention gap.
/// The feature must take only the values 0 and 1 in the training rows.
SuppressionResult suppress_feature_finetune(const MlpClassifier& base, const Matrix& features,
                                            std::span<const int> labels,
                                            const Matrix& val_features,
                                            std::span<const int> val_labels,
                                            const SuppressionConfig& cfg);

}  // namespace onshap
