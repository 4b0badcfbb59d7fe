#include "onshap/dense_net.hpp"

#include <cmath>
#include <sstream>

namespace onshap {
namespace {

constexpr int kFormatVersion = 1;
constexpr double kProbabilityFloor = 1e-12;

void apply_output_activation(Matrix& z, Activation activation) {
  switch (activation) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::identity:
      break;
    case Activation::sigmoid:
      z = (1.0 + (-z.array()).exp()).inverse().matrix();
      break;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
      }
      break;
  }
}

// dLoss/dPreactivation from dLoss/dActivation for the given activation.
Matrix activation_backward(const Matrix& activated, const Matrix& d_activated,
                           Activation activation) {
  switch (activation) {
    case Activation::relu:
      return (activated.array() > 0.0).select(d_activated, 0.0);
    case Activation::identity:
      return d_activated;
    case Activation::sigmoid:
      return (d_activated.array() * activated.array() * (1.0 - activated.array())).matrix();
    case Activation::softmax: {
      Matrix dz(activated.rows(), activated.cols());
      for (Eigen::Index r = 0; r < activated.rows(); ++r) {
        const double dot = d_activated.row(r).dot(activated.row(r));
        dz.row(r) = (activated.row(r).array() * (d_activated.row(r).array() - dot)).matrix();
      }
      return dz;
    }
  }
  return d_activated;
}

}  // namespace

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
    case Activation::softmax:
      return "softmax";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  if (name == "softmax") return Activation::softmax;
  if (name == "sigmoid") return Activation::sigmoid;
  throw DataError("unknown activation '" + std::string(name) + "'");
}

void Gradients::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void Gradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

double Gradients::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weights) total += w.squaredNorm();
  for (const auto& b : biases) total += b.squaredNorm();
  return total;
}

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, Activation output_activation,
                   std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)), output_activation_(output_activation), seed_(seed) {
  if (layer_sizes_.size() < 2) throw UsageError("a network needs at least input and output layers");
  for (std::size_t s : layer_sizes_) {
    if (s == 0) throw UsageError("layer sizes must be positive");
  }
  if (output_activation_ == Activation::relu) {
    throw UsageError("relu is reserved for hidden layers");
  }
  Rng rng(seed_);
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t fan_in = layer_sizes_[l];
    const std::size_t fan_out = layer_sizes_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(fan_in, fan_out), RowVector::Zero(fan_out)};
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
    layers_.push_back(std::move(layer));
  }
}

Matrix DenseNet::forward(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_size()) {
    std::ostringstream msg;
    msg << "network expects " << input_size() << " input columns, got " << batch.cols();
    throw ShapeError(msg.str());
  }
  Matrix a = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = a * layers_[l].weights;
    z.rowwise() += layers_[l].bias;
    apply_output_activation(z, l + 1 == layers_.size() ? output_activation_ : Activation::relu);
    a = std::move(z);
  }
  return a;
}

ForwardTape DenseNet::forward_tape(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_size()) {
    std::ostringstream msg;
    msg << "network expects " << input_size() << " input columns, got " << batch.cols();
    throw ShapeError(msg.str());
  }
  ForwardTape tape;
  tape.activations.reserve(layers_.size() + 1);
  tape.activations.push_back(batch);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = tape.activations.back() * layers_[l].weights;
    z.rowwise() += layers_[l].bias;
    apply_output_activation(z, l + 1 == layers_.size() ? output_activation_ : Activation::relu);
    tape.activations.push_back(std::move(z));
  }
  return tape;
}

Matrix DenseNet::backward(const ForwardTape& tape, const Matrix& d_output,
                          Gradients& grads) const {
  Matrix d_a = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Activation act = l + 1 == layers_.size() ? output_activation_ : Activation::relu;
    const Matrix dz = activation_backward(tape.activations[l + 1], d_a, act);
    grads.weights[l].noalias() += tape.activations[l].transpose() * dz;
    grads.biases[l] += dz.colwise().sum();
    d_a = dz * layers_[l].weights.transpose();
  }
  return d_a;
}

Gradients DenseNet::zero_gradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    g.biases.push_back(RowVector::Zero(layer.bias.size()));
  }
  return g;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weights.size() + layer.bias.size();
  return count;
}

double& DenseNet::parameter(std::size_t index) {
  for (auto& layer : layers_) {
    const auto nw = static_cast<std::size_t>(layer.weights.size());
    if (index < nw) return layer.weights.data()[index];
    index -= nw;
    const auto nb = static_cast<std::size_t>(layer.bias.size());
    if (index < nb) return layer.bias[static_cast<Eigen::Index>(index)];
    index -= nb;
  }
  throw UsageError("parameter index out of range");
}

double DenseNet::gradient_at(const Gradients& grads, std::size_t index) {
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const auto nw = static_cast<std::size_t>(grads.weights[l].size());
    if (index < nw) return grads.weights[l].data()[index];
    index -= nw;
    const auto nb = static_cast<std::size_t>(grads.biases[l].size());
    if (index < nb) return grads.biases[l][static_cast<Eigen::Index>(index)];
    index -= nb;
  }
  throw UsageError("gradient index out of range");
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json doc;
  doc["format"] = "onshap-densenet";
  doc["version"] = kFormatVersion;
  doc["layer_sizes"] = layer_sizes_;
  doc["hidden_activation"] = "relu";
  doc["output_activation"] = to_string(output_activation_);
  doc["seed"] = seed_;
  auto& weights = doc["weights"] = nlohmann::json::array();
  auto& biases = doc["biases"] = nlohmann::json::array();
  for (const auto& layer : layers_) {
    weights.push_back(std::vector<double>(layer.weights.data(),
                                          layer.weights.data() + layer.weights.size()));
    biases.push_back(std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size()));
  }
  return doc;
}

DenseNet DenseNet::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "onshap-densenet") throw DataError("not a serialized network");
  if (doc.value("version", 0) != kFormatVersion) throw DataError("unsupported network version");
  DenseNet net;
  net.layer_sizes_ = doc.at("layer_sizes").get<std::vector<std::size_t>>();
  net.output_activation_ = activation_from_string(doc.at("output_activation").get<std::string>());
  net.seed_ = doc.at("seed").get<std::uint64_t>();
  const auto& weights = doc.at("weights");
  const auto& biases = doc.at("biases");
  if (weights.size() + 1 != net.layer_sizes_.size() || biases.size() != weights.size()) {
    throw DataError("network layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l + 1 < net.layer_sizes_.size(); ++l) {
    const auto w = weights[l].get<std::vector<double>>();
    const auto b = biases[l].get<std::vector<double>>();
    const auto rows = static_cast<Eigen::Index>(net.layer_sizes_[l]);
    const auto cols = static_cast<Eigen::Index>(net.layer_sizes_[l + 1]);
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != cols) {
      throw DataError("network parameter array has the wrong size");
    }
    DenseLayer layer{Eigen::Map<const Matrix>(w.data(), rows, cols),
                     Eigen::Map<const RowVector>(b.data(), cols)};
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

bool DenseNet::operator==(const DenseNet& other) const {
  if (layer_sizes_ != other.layer_sizes_ || output_activation_ != other.output_activation_ ||
      seed_ != other.seed_) {
    return false;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

LossEvaluation cross_entropy_loss(const Matrix& probabilities, const Matrix& targets) {
  if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols()) {
    throw ShapeError("cross entropy: output and target shapes differ");
  }
  const auto rows = probabilities.rows();
  LossEvaluation out{Vector(rows), Matrix(rows, probabilities.cols())};
  const double inv_rows = rows > 0 ? 1.0 / static_cast<double>(rows) : 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    double loss = 0.0;
    for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
      const double p = std::max(probabilities(r, c), kProbabilityFloor);
      const double t = targets(r, c);
      loss -= t * std::log(p);
      out.d_output(r, c) = -t / p * inv_rows;
    }
    out.per_row[r] = loss;
  }
  return out;
}

LossEvaluation squared_error_loss(const Matrix& output, const Matrix& targets) {
  if (output.rows() != targets.rows() || output.cols() != targets.cols()) {
    throw ShapeError("squared error: output and target shapes differ");
  }
  const Matrix diff = output - targets;
  const double cols = static_cast<double>(output.cols());
  const double rows = static_cast<double>(std::max<Eigen::Index>(1, output.rows()));
  LossEvaluation out;
  out.per_row = diff.array().square().rowwise().sum().matrix() / cols;
  out.d_output = diff * (2.0 / (cols * rows));
  return out;
}

GradientResult compute_gradients(const DenseNet& net, const Matrix& batch, const Matrix& targets,
                                 OutputLoss loss) {
  const ForwardTape tape = net.forward_tape(batch);
  const LossEvaluation eval = loss(tape.output(), targets);
  for (Eigen::Index r = 0; r < eval.per_row.size(); ++r) {
    if (!std::isfinite(eval.per_row[r])) {
      throw NumericError("non-finite loss at batch row " + std::to_string(r));
    }
  }
  GradientResult result{eval.mean(), net.zero_gradients()};
  net.backward(tape, eval.d_output, result.grads);
  return result;
}

}  // namespace onshap
