#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "onshap/attribution.hpp"
#include "onshap/model.hpp"
#include "onshap/value_function.hpp"

namespace onshap {

inline constexpr std::size_t kMaxExactFeatures = 20;

/// Marginal contributions v(S + i) - v(S) binned by |S|.
class SizeProfile {
 public:
  explicit SizeProfile(std::size_t n_features = 0);

  void add(std::size_t coalition_size, double marginal);
  void merge(const SizeProfile& other);

  std::size_t n_features() const { return n_; }
  std::vector<double> mean() const;
  std::vector<double> mean_abs() const;
  std::vector<double> std_error() const;
  std::size_t count(std::size_t size) const { return counts_[size]; }

  /// Share of the mean-marginal curve carried by sizes below n/2; NaN unless
  /// the curve sums to a positive total.
  double small_coalition_mass() const;

  nlohmann::json to_json() const;
  static SizeProfile from_json(const nlohmann::json& doc);

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
  std::vector<CompensatedSum> sums_;
  std::vector<CompensatedSum> square_sums_;
  std::vector<CompensatedSum> abs_sums_;
};

/// Exact Shapley values from all 2^n coalitions (n <= 20). Stochastic value
/// functions are evaluated once per coalition with a generator seeded by `seed`.
Attribution shapley_exact(const ValueFunction& v, std::uint64_t seed = 0);

struct McOptions {
  std::size_t n_samples = 1000;  // permutations
  std::uint64_t seed = 0;
  bool antithetic = false;  // pair every permutation with its reverse
  SizeProfile* profile = nullptr;
};

/// Permutation-sampling estimate. Each permutation telescopes, so the sum of
/// its marginals equals v(N) - v(empty) as evaluated within that permutation.
Attribution shapley_mc(const ValueFunction& v, const McOptions& options);

/// Global values: for each sample draw a labeled row uniformly and take the
/// marginals of a single random permutation of its local game.
Attribution shapley_global(const Matrix& points, std::span<const int> labels,
                           const VfFactory& factory, std::size_t n_samples, std::uint64_t seed,
                           SizeProfile* profile = nullptr);

struct SumRuleReport {
  double observed = 0.0;  // sum of attribution values
  double expected = 0.0;  // v(N) - v(empty), or its global counterpart
  double residual = 0.0;
  double std_error = 0.0;
  bool within(double n_std_errors, double abs_tol = 1e-9) const;
};

/// Local rule with fresh evaluations of v(N) and v(empty) (n_eval each).
SumRuleReport sum_rule_check(const Attribution& a, const ValueFunction& v,
                             std::size_t n_eval = 1, std::uint64_t seed = 0);

/// Global rule against E_{(x,y)} f_y(x) - E_x' E_y f_y(x') over the given rows,
/// with p(y) the label frequencies of those rows.
SumRuleReport global_sum_rule_check(const Attribution& a, const Model& model,
                                    const Matrix& points, std::span<const int> labels);

/// Mean marginal by coalition size over n_samples (row, single permutation) draws.
SizeProfile summand_by_coalition_size(const Matrix& points, std::span<const int> classes,
                                      const VfFactory& factory, std::size_t n_samples,
                                      std::uint64_t seed);

}  // namespace onshap
