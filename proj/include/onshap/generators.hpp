#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "onshap/dataset.hpp"

namespace onshap {

/// Latent bit z ~ Bernoulli(1/2). Inliers: every feature ~ N(z, sigma^2).
/// Outliers: the first `flipped_features` features ~ N(1 - z, sigma^2), the rest ~ N(z, sigma^2).
struct OutlierGenConfig {
  std::size_t n_points = 10000;
  double sigma = 0.05;
  double outlier_fraction = 0.01;
  std::size_t n_features = 20;
  std::size_t flipped_features = 5;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t n_outliers() const;
  nlohmann::json to_json() const;
};

/// Exactly n_outliers() outliers at random positions; label 1 marks an outlier.
Dataset gen_outlier_data(const OutlierGenConfig& cfg);

/// Joint distribution over (x0, x1, y), all binary: p[x0][x1][y].
struct JointTable {
  std::array<std::array<std::array<double, 2>, 2>, 2> p{};

  /// Positively correlated features; at fixed x0, y = 1 is less likely when x1 = 1.
  static JointTable default_table();
  /// Builds a table from p(x0=1), p(x1=1 | x0) and p(y=1 | x0, x1).
  static JointTable from_conditionals(double p_x0, std::array<double, 2> p_x1_given_x0,
                                      std::array<std::array<double, 2>, 2> p_y_given_x);

  void validate() const;  // nonnegative cells summing to 1
  double p_x(int x0, int x1) const { return p[x0][x1][0] + p[x0][x1][1]; }
  double p_y_given(int x0, int x1) const;
  double feature_correlation() const;
  nlohmann::json to_json() const;
  static JointTable from_json(const nlohmann::json& doc);
};

Dataset gen_two_feature_data(const JointTable& table, std::size_t n_points, std::uint64_t seed);

/// Ten correlated binary usage indicators driven by a latent propensity, with
/// an eleventh (the label) depending on the propensity and two of the features.
Dataset gen_drug_like(std::size_t n_points, std::uint64_t seed);

/// Census-style stand-in: binary "sex", a strongly sex-correlated binary proxy
/// ("husband"), and continuous demographics; label is high income.
Dataset gen_census_like(std::size_t n_points, std::uint64_t seed);

}  // namespace onshap
