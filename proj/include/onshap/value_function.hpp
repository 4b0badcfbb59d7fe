#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "onshap/coalition.hpp"

namespace onshap {

/// v(S) for a fixed explained quantity (a data point and class, or a whole game).
/// Implementations are immutable; `rng` drives any inner sampling so that
/// concurrent callers with separate generators never share state.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;

  virtual std::size_t n_features() const = 0;
  virtual std::string id() const = 0;

  /// Writes v(coalitions[k]) into out[k].
  virtual void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                              std::span<double> out) const = 0;

  /// As evaluate_batch, also writing the estimated variance of each value
  /// (zero unless the value is an average over inner draws).
  virtual void evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                            std::span<double> out,
                                            std::span<double> variance) const;

  double evaluate(const Coalition& s, Rng& rng) const;
  double evaluate(const Coalition& s) const;  // for deterministic games
};

using ValueFunctionPtr = std::unique_ptr<const ValueFunction>;

/// Builds the value function explaining class `y` at data row `x`.
using VfFactory = std::function<ValueFunctionPtr(const Vector& x, int y)>;

/// Deterministic game from a callable.
class GameValueFunction final : public ValueFunction {
 public:
  using Game = std::function<double(const Coalition&)>;
  GameValueFunction(std::size_t n, Game game, std::string id = "game")
      : n_(n), game_(std::move(game)), id_(std::move(id)) {}

  std::size_t n_features() const override { return n_; }
  std::string id() const override { return id_; }
  void evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                      std::span<double> out) const override;

 private:
  std::size_t n_;
  Game game_;
  std::string id_;
};

}  // namespace onshap
