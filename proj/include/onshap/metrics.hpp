#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "onshap/attribution.hpp"
#include "onshap/model.hpp"
#include "onshap/value_function.hpp"

namespace onshap {

struct MseReport {
  double mse = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::string method_id;
  std::string dataset_id;

  nlohmann::json to_json() const;
  static MseReport from_json(const nlohmann::json& doc);
};

/// Monte Carlo estimate of E_x E_S mean_y |f_y(x) - v_y(x, S)|^2 with S drawn
/// by sample_shapley_coalition and x uniform over the rows of `points`.
/// Value functions that average inner draws are debiased by the estimated
/// variance of their mean, so single samples may be negative.
MseReport value_function_mse(const Model& model, const VfFactory& factory, const Matrix& points,
                             std::size_t n_samples, std::uint64_t seed);

/// Combines repeated runs (e.g. retrainings): mean of the MSEs, standard error
/// from their spread (or the single run's own error when there is one run).
MseReport aggregate_mse(std::span<const MseReport> runs);

std::string mse_table_csv(std::span<const MseReport> rows);

/// Fraction of attributions whose k largest values (k = |ground_truth|) are not
/// exactly the ground-truth features. A tie across the top-k boundary counts as an error.
double explanation_error_rate(std::span<const Attribution> attributions,
                              const std::vector<std::size_t>& ground_truth);
bool explanation_in_error(std::span<const double> values,
                          const std::vector<std::size_t>& ground_truth);

struct Agreement {
  double spearman_rho = 0.0;
  double max_abs_diff = 0.0;
  double within_error_bars = 0.0;  // share of features with |a-b| <= 3 combined std errors
  nlohmann::json to_json() const;
};

Agreement attribution_agreement(const Attribution& a, const Attribution& b);

/// Ranks with ties sharing their average rank (1-based).
std::vector<double> average_ranks(std::span<const double> values);
double spearman(std::span<const double> a, std::span<const double> b);

/// Gini coefficient of the absolute values (0 = uniform, -> 1 = concentrated).
double gini_coefficient(std::span<const double> values);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace onshap
