#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onshap/conditional_sampler.hpp"
#include "onshap/model.hpp"
#include "onshap/surrogate.hpp"
#include "onshap/value_function.hpp"

namespace onshap {

enum class VfMethod { off_manifold, empirical_conditional, generative, surrogate, retraining };

std::string to_string(VfMethod method);
VfMethod vf_method_from_string(std::string_view name);

/// v(S) = mean over x' ~ background of f_y(x_S, x'_{not S}).
class OffManifoldVf final : public ValueFunction {
 public:
  /// n_inner background rows are drawn per coalition; with `exhaustive` every
  /// background row is used once instead.
  OffManifoldVf(ModelPtr model, std::shared_ptr<const Matrix> background, Vector x, int y,
                std::size_t n_inner = 1, bool exhaustive = false);

  std::size_t n_features() const override { return static_cast<std::size_t>(x_.size()); }
  std::string id() const override { return "off_manifold"; }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;
  void evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                    std::span<double> out,
                                    std::span<double> variance) const override;

 private:
  ModelPtr model_;
  std::shared_ptr<const Matrix> background_;
  Vector x_;
  int y_;
  std::size_t n_inner_;
  bool exhaustive_;
};

/// Background rows and their model outputs, shared by every empirical
/// conditional value function on the same model.
class EmpiricalConditionalContext {
 public:
  EmpiricalConditionalContext(ModelPtr model, Matrix background);

  std::size_t n_features() const { return static_cast<std::size_t>(background_.cols()); }
  const Matrix& background() const { return background_; }
  const Matrix& predictions() const { return predictions_; }

  /// Mean of f_y over background rows agreeing with x on S; if none agree, over
  /// the rows at minimal Hamming distance on S (counted as a fallback).
  double conditional_mean(const Vector& x, const Coalition& s, int y) const;

  std::size_t fallback_count() const { return fallbacks_.load(); }
  void reset_fallback_count() { fallbacks_.store(0); }

 private:
  Matrix background_;
  Matrix predictions_;
  bool packed_ = false;  // all features binary and n <= 64
  std::vector<std::uint64_t> codes_;
  mutable std::atomic<std::size_t> fallbacks_{0};
};

class EmpiricalConditionalVf final : public ValueFunction {
 public:
  EmpiricalConditionalVf(std::shared_ptr<const EmpiricalConditionalContext> context, Vector x,
                         int y);

  std::size_t n_features() const override { return context_->n_features(); }
  std::string id() const override { return "empirical_conditional"; }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;

 private:
  std::shared_ptr<const EmpiricalConditionalContext> context_;
  Vector x_;
  int y_;
};

/// v(S) = mean of f_y(x') over n_inner draws x' ~ sampler(. | x_S).
class SamplerVf final : public ValueFunction {
 public:
  SamplerVf(ModelPtr model, std::shared_ptr<const ConditionalSampler> sampler, Vector x, int y,
            std::size_t n_inner);

  std::size_t n_features() const override { return static_cast<std::size_t>(x_.size()); }
  std::string id() const override { return sampler_->id(); }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;
  void evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                    std::span<double> out,
                                    std::span<double> variance) const override;

 private:
  ModelPtr model_;
  std::shared_ptr<const ConditionalSampler> sampler_;
  Vector x_;
  int y_;
  std::size_t n_inner_;
};

/// v(S) = g_y(mask(x, S)).
class SurrogateVf final : public ValueFunction {
 public:
  SurrogateVf(std::shared_ptr<const Surrogate> surrogate, Vector x, int y);

  std::size_t n_features() const override { return static_cast<std::size_t>(x_.size()); }
  std::string id() const override { return "surrogate"; }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;

 private:
  std::shared_ptr<const Surrogate> surrogate_;
  Vector x_;
  int y_;
};

VfFactory off_manifold_factory(ModelPtr model, std::shared_ptr<const Matrix> background,
                               std::size_t n_inner = 1);
VfFactory empirical_factory(std::shared_ptr<const EmpiricalConditionalContext> context);
VfFactory sampler_factory(ModelPtr model, std::shared_ptr<const ConditionalSampler> sampler,
                          std::size_t n_inner);
VfFactory surrogate_factory(std::shared_ptr<const Surrogate> surrogate);

struct RetrainingRecord {
  std::string coalition_hex;
  double accuracy = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
};

/// Append-only line-delimited JSON store of retraining results keyed by
/// (dataset fingerprint, coalition, seed). Safe for concurrent use.
class RetrainingCache {
 public:
  explicit RetrainingCache(std::optional<std::filesystem::path> path = std::nullopt);

  std::optional<RetrainingRecord> find(const std::string& dataset, const std::string& coalition_hex,
                                       std::uint64_t seed) const;
  void store(const std::string& dataset, const RetrainingRecord& record);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::map<std::string, RetrainingRecord> records_;
};

/// Fits a classifier on the given columns of the training rows.
using ModelTrainer =
    std::function<ModelPtr(const Matrix& x, std::span<const int> y, std::uint64_t seed)>;

/// A(g_S): stochastic-draw test accuracy mean_i g_S(y_i | x_i) of a model
/// refit on the columns in S. A(g_empty) = sum_y p_test(y)^2.
class RetrainingGame final : public ValueFunction {
 public:
  RetrainingGame(Matrix train_x, std::vector<int> train_y, Matrix test_x,
                 std::vector<int> test_y, std::size_t n_classes, ModelTrainer trainer,
                 std::uint64_t seed, std::string dataset_fingerprint,
                 std::shared_ptr<RetrainingCache> cache = nullptr);

  std::size_t n_features() const override { return static_cast<std::size_t>(train_x_.cols()); }
  std::string id() const override { return "retraining"; }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;

  RetrainingRecord fit(const Coalition& s) const;
  /// Fits every coalition not yet cached, spreading fits over threads.
  void prefetch_all() const;
  std::size_t fits_performed() const { return fits_.load(); }

 private:
  Matrix train_x_;
  std::vector<int> train_y_;
  Matrix test_x_;
  std::vector<int> test_y_;
  std::size_t n_classes_;
  ModelTrainer trainer_;
  std::uint64_t seed_;
  std::string dataset_;
  std::shared_ptr<RetrainingCache> cache_;
  mutable std::atomic<std::size_t> fits_{0};
};

}  // namespace onshap
