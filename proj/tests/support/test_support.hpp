#pragma once
// Shared helpers for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "onshap/coalition.hpp"
#include "onshap/common.hpp"
#include "onshap/model.hpp"
#include "onshap/value_function.hpp"

namespace onshap::testing {

/// Table game: v(S) = values[bits(S)], n <= 16.
struct TableGame {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(const Coalition& s) const { return values[s.low_bits()]; }
  GameValueFunction vf() const {
    return GameValueFunction(n, [t = *this](const Coalition& s) { return t(s); });
  }
};

inline TableGame random_game(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  TableGame g{n, std::vector<double>(std::size_t{1} << n)};
  for (auto& v : g.values) v = normal(rng);
  return g;
}

/// Random game in which feature i contributes nothing.
inline TableGame random_game_with_dummy(std::size_t n, std::size_t dummy, Rng& rng) {
  TableGame g = random_game(n, rng);
  const std::uint64_t bit = std::uint64_t{1} << dummy;
  for (std::uint64_t s = 0; s < g.values.size(); ++s) {
    if (s & bit) g.values[s] = g.values[s & ~bit];
  }
  return g;
}

/// Random game symmetric in features i and j.
inline TableGame random_game_with_symmetry(std::size_t n, std::size_t i, std::size_t j, Rng& rng) {
  TableGame g = random_game(n, rng);
  const std::uint64_t bi = std::uint64_t{1} << i, bj = std::uint64_t{1} << j;
  for (std::uint64_t s = 0; s < g.values.size(); ++s) {
    if ((s & bi) && !(s & bj)) g.values[(s & ~bi) | bj] = g.values[s];
  }
  return g;
}

/// Shapley values by averaging marginals over all n! orderings.
inline std::vector<double> brute_force_shapley(const TableGame& g) {
  std::vector<std::size_t> order(g.n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<long double> phi(g.n, 0.0L);
  std::size_t count = 0;
  do {
    std::uint64_t s = 0;
    for (std::size_t i : order) {
      phi[i] += static_cast<long double>(g.values[s | (std::uint64_t{1} << i)]) - g.values[s];
      s |= std::uint64_t{1} << i;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  std::vector<double> out(g.n);
  for (std::size_t i = 0; i < g.n; ++i) out[i] = static_cast<double>(phi[i] / count);
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("onshap-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
  return m;
}

inline Matrix random_binary(std::size_t rows, std::size_t cols, Rng& rng) {
  std::bernoulli_distribution b(0.5);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = b(rng) ? 1.0 : 0.0;
  return m;
}

}  // namespace onshap::testing

namespace onshap::testing {

/// Two-class logistic model p(y=1|x) = sigmoid(w.x + b).
class LogisticModel final : public Model {
 public:
  LogisticModel(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {}
  std::string kind() const override { return "test_logistic"; }
  std::size_t n_features() const override { return w_.size(); }
  std::size_t n_outputs() const override { return 2; }
  nlohmann::json to_json() const override { return {{"kind", kind()}, {"w", w_}, {"b", b_}}; }

 protected:
  Matrix predict_unchecked(const Matrix& batch) const override {
    Matrix out(batch.rows(), 2);
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      double z = b_;
      for (std::size_t i = 0; i < w_.size(); ++i) z += w_[i] * batch(r, static_cast<Eigen::Index>(i));
      out(r, 1) = 1.0 / (1.0 + std::exp(-z));
      out(r, 0) = 1.0 - out(r, 1);
    }
    return out;
  }

 private:
  std::vector<double> w_;
  double b_;
};

}  // namespace onshap::testing
