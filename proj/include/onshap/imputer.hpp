#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "onshap/conditional_sampler.hpp"
#include "onshap/dataset.hpp"
#include "onshap/dense_net.hpp"
#include "onshap/training.hpp"

namespace onshap {

struct ImputerHyper {
  std::size_t hidden = 128;
  std::size_t latent_dim = 4;
  std::size_t n_modes = 1;
  double beta = 0.5;
  double continuous_variance = 0.1;  // fixed decoder variance of continuous features
  bool sample_continuous = false;    // imputation draws the mean unless set
  TrainConfig train;

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys missing from `doc` keep the values of `defaults`.
  static ImputerHyper from_json(const nlohmann::json& doc, const ImputerHyper& defaults);
  static ImputerHyper from_json(const nlohmann::json& doc);
};

/// Scale parameterisation shared by both encoders.
double positive_scale(double raw);        // softplus(raw) + 1e-4
double positive_scale_grad(double raw);   // d positive_scale / d raw

/// Closed-form KL(N(mu1, s1^2) || N(mu2, s2^2)) summed over dimensions.
double kl_diag_normals(const RowVector& mu1, const RowVector& s1, const RowVector& mu2,
                       const RowVector& s2);
double kl_to_standard_normal(const RowVector& mu, const RowVector& s);

/// Mixture of diagonal normals produced by the masked encoder for one input.
struct GaussianMixture {
  RowVector weights;         // K, on the simplex
  std::vector<RowVector> means;
  std::vector<RowVector> scales;
  double log_density(const RowVector& z) const;
};

struct ElboTerms {
  Vector loss;  // -(L0 + beta * L_reg) per row
  Vector reconstruction;
  Vector kl_masked;  // KL(q || r), closed form for one mode, single-sample otherwise
  Vector kl_prior;
  double mean_loss() const { return loss.mean(); }
};

/// Variational autoencoder with a masked Gaussian-mixture encoder r(z | x_S).
class Imputer final : public ConditionalSampler {
 public:
  Imputer(std::vector<ColumnSchema> schema, const ImputerHyper& hyper, std::uint64_t seed);
  Imputer(std::vector<ColumnSchema> schema, const ImputerHyper& hyper, DenseNet encoder,
          DenseNet decoder, DenseNet masked_encoder);

  std::size_t n_features() const override { return schema_.size(); }
  std::string id() const override { return "generative"; }
  const ImputerHyper& hyper() const { return hyper_; }
  const std::vector<ColumnSchema>& schema() const { return schema_; }

  DenseNet& encoder() { return encoder_; }
  DenseNet& decoder() { return decoder_; }
  DenseNet& masked_encoder() { return masked_encoder_; }
  const DenseNet& encoder() const { return encoder_; }
  const DenseNet& decoder() const { return decoder_; }
  const DenseNet& masked_encoder() const { return masked_encoder_; }
  std::vector<DenseNet*> networks() { return {&encoder_, &decoder_, &masked_encoder_}; }

  /// Loss on rows x with masked copies `masked` and standard-normal noise `eps`
  /// (rows x latent_dim). With non-null grads (encoder, decoder, masked encoder),
  /// adds the gradient of the mean loss.
  ElboTerms elbo(const Matrix& x, const Matrix& masked, const Matrix& eps,
                 std::vector<Gradients>* grads = nullptr) const;
  ElboTerms elbo(const Matrix& x, const std::vector<Coalition>& coalitions, Rng& rng) const;

  /// r(z | x_S) for each masked row.
  std::vector<GaussianMixture> masked_posterior(const Matrix& masked) const;

  Matrix sample(const Vector& x, std::span<const Coalition> coalitions, std::size_t n_draws,
                Rng& rng) const override;
  Matrix sample_conditional(const Vector& x, const Coalition& s, std::size_t n, Rng& rng) const;

  nlohmann::json to_json() const;
  static Imputer from_json(const nlohmann::json& doc);

 private:
  std::size_t decoder_width() const;

  std::vector<ColumnSchema> schema_;
  ImputerHyper hyper_;
  DenseNet encoder_;
  DenseNet decoder_;
  DenseNet masked_encoder_;
  std::vector<std::size_t> offsets_;  // decoder output offset per feature
};

struct ImputerFit {
  std::shared_ptr<Imputer> imputer;
  TrainHistory history;
};

/// Each minibatch row is paired with a coalition from sample_shapley_coalition.
/// Early stopping monitors the loss on validation rows with fixed coalitions and noise.
ImputerFit train_imputer(const Matrix& train_x, const Matrix& val_x,
                         const std::vector<ColumnSchema>& schema, const ImputerHyper& hyper);

}  // namespace onshap
