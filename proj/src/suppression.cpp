#include "onshap/suppression.hpp"

#include <cmath>

#include "onshap/dataset.hpp"

namespace onshap {
namespace {

// Loss of the rows and, if grads is non-null, its gradient.
double penalised_loss(const DenseNet& net, const Matrix& x, const Matrix& targets,
                      std::size_t feature, double alpha, Gradients* grads) {
  const double n = static_cast<double>(x.rows());
  const ForwardTape tape = net.forward_tape(x);
  const LossEvaluation ce = cross_entropy_loss(tape.output(), targets);
  double total = ce.mean();
  if (grads) net.backward(tape, ce.d_output, *grads);
  if (alpha == 0.0) return total;

  const auto [x0, x1] = intervene(x, feature);
  const ForwardTape t0 = net.forward_tape(x0);
  const ForwardTape t1 = net.forward_tape(x1);
  const Matrix diff = t1.output() - t0.output();
  total += alpha * 0.5 * diff.cwiseAbs().sum() / n;
  if (grads) {
    const Matrix d = diff.unaryExpr([&](double v) {
      return alpha * 0.5 * static_cast<double>((v > 0.0) - (v < 0.0)) / n;
    });
    net.backward(t1, d, *grads);
    net.backward(t0, -d, *grads);
  }
  return total;
}

}  // namespace

std::pair<Matrix, Matrix> intervene(const Matrix& batch, std::size_t feature) {
  if (static_cast<Eigen::Index>(feature) >= batch.cols()) {
    throw UsageError("intervention feature " + std::to_string(feature) + " out of range for " +
                     std::to_string(batch.cols()) + " columns");
  }
  Matrix off = batch, on = batch;
  off.col(static_cast<Eigen::Index>(feature)).setZero();
  on.col(static_cast<Eigen::Index>(feature)).setOnes();
  return {std::move(off), std::move(on)};
}

double mean_intervention_gap(const Model& model, const Matrix& features, std::size_t feature) {
  if (features.rows() == 0) return 0.0;
  const auto [x0, x1] = intervene(features, feature);
  return 0.5 * (model.predict(x1) - model.predict(x0)).cwiseAbs().sum() /
         static_cast<double>(features.rows());
}

double prediction_agreement(const Model& a, const Model& b, const Matrix& features) {
  if (features.rows() == 0) return 1.0;
  const Matrix pa = a.predict(features), pb = b.predict(features);
  std::size_t same = 0;
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    Eigen::Index ia = 0, ib = 0;
    pa.row(r).maxCoeff(&ia);
    pb.row(r).maxCoeff(&ib);
    same += ia == ib;
  }
  return static_cast<double>(same) / static_cast<double>(features.rows());
}

SuppressionResult suppress_feature_finetune(const MlpClassifier& base, const Matrix& features,
                                            std::span<const int> labels,
                                            const Matrix& val_features,
                                            std::span<const int> val_labels,
                                            const SuppressionConfig& cfg) {
  if (cfg.feature >= base.n_features()) throw UsageError("suppressed feature index out of range");
  if (cfg.alpha < 0.0) throw UsageError("alpha must be nonnegative");
  const auto col = static_cast<Eigen::Index>(cfg.feature);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const double v = features(r, col);
    if (v != 0.0 && v != 1.0) {
      throw DataError("feature " + std::to_string(cfg.feature) +
                      " is not binary (row " + std::to_string(r) + " holds " +
                      std::to_string(v) + ")");
    }
  }
  const std::size_t n_classes = base.n_outputs();
  const Matrix targets = one_hot(labels, n_classes);
  const Matrix val_targets = one_hot(val_labels, n_classes);

  DenseNet net = base.net();
  auto objective = [&](std::span<const std::size_t> rows, Rng&, std::vector<Gradients>& grads) {
    return penalised_loss(net, gather_rows(features, rows), gather_rows(targets, rows),
                          cfg.feature, cfg.alpha, &grads[0]);
  };
  ValidationObjective validation;
  if (val_features.rows() > 0) {
    validation = [&] {
      return penalised_loss(net, val_features, val_targets, cfg.feature, cfg.alpha, nullptr);
    };
  }
  const Matrix& probe = val_features.rows() > 0 ? val_features : features;
  const double before = mean_intervention_gap(base, probe, cfg.feature);
  TrainHistory history = train_networks({&net}, static_cast<std::size_t>(features.rows()),
                                        objective, validation, cfg.train);
  MlpClassifier tuned(std::move(net));
  const double after = mean_intervention_gap(tuned, probe, cfg.feature);
  return {std::move(tuned), std::move(history), before, after};
}

}  // namespace onshap
