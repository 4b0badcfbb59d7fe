#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "onshap/common.hpp"

namespace onshap {

// Hidden layers always use relu; the output activation is chosen per use.
enum class Activation { relu, identity, softmax, sigmoid };

std::string to_string(Activation activation);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  RowVector bias;
};

/// Post-activation values of every layer; activations[0] is the input batch.
struct ForwardTape {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

/// Parameter gradients, congruent to DenseNet::layers().
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<RowVector> biases;

  void set_zero();
  void scale(double factor);
  Gradients& operator+=(const Gradients& other);
  double squared_norm() const;
};

/// Fully connected feed-forward network.
///
/// Parameters are 64-bit. Weights are initialised uniformly in
/// [-sqrt(6/fan_in), sqrt(6/fan_in)] from the construction seed; biases start at zero.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<std::size_t> layer_sizes, Activation output_activation,
           std::uint64_t seed);

  Matrix forward(const Matrix& batch) const;
  ForwardTape forward_tape(const Matrix& batch) const;

  /// Accumulates dLoss/dParameters into `grads` and returns dLoss/dInput.
  Matrix backward(const ForwardTape& tape, const Matrix& d_output, Gradients& grads) const;

  Gradients zero_gradients() const;

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_size() const { return layer_sizes_.front(); }
  std::size_t output_size() const { return layer_sizes_.back(); }
  Activation output_activation() const { return output_activation_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Flat parameter view (weights row-major, then bias, layer by layer); used by
  // finite-difference checks.
  std::size_t parameter_count() const;
  double& parameter(std::size_t index);
  static double gradient_at(const Gradients& grads, std::size_t index);

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& doc);

  bool operator==(const DenseNet& other) const;

 private:
  std::vector<std::size_t> layer_sizes_;
  Activation output_activation_ = Activation::identity;
  std::uint64_t seed_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Per-row loss values and the gradient of the *mean* loss w.r.t. the network output.
struct LossEvaluation {
  Vector per_row;
  Matrix d_output;
  double mean() const { return per_row.size() ? per_row.mean() : 0.0; }
};

// Targets are probability vectors (one-hot for hard labels).
LossEvaluation cross_entropy_loss(const Matrix& probabilities, const Matrix& targets);
// Mean over rows of the mean squared difference across output slots.
LossEvaluation squared_error_loss(const Matrix& output, const Matrix& targets);

using OutputLoss = LossEvaluation (*)(const Matrix&, const Matrix&);

struct GradientResult {
  double loss = 0.0;
  Gradients grads;
};

/// Gradient of the mean loss over `batch`. Throws NumericError naming the
/// first row with a non-finite loss.
GradientResult compute_gradients(const DenseNet& net, const Matrix& batch, const Matrix& targets,
                                 OutputLoss loss);

}  // namespace onshap
