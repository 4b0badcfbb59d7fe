#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace onshap {

enum class AttributionScope { local, global };

/// Per-feature Shapley estimates with standard errors.
struct Attribution {
  std::vector<std::string> feature_names;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::size_t n_samples = 0;  // permutations (local) or sampled points (global); 0 when exact
  bool exact = false;
  AttributionScope scope = AttributionScope::local;
  std::optional<std::size_t> point_index;
  std::optional<int> target_class;
  std::string value_function_id;
  std::uint64_t seed = 0;

  // Sum rule bookkeeping over the same samples that produced the values:
  // value_full estimates v(N) (global: E f_y(x)), value_empty estimates v(empty)
  // (global: E_x' E_y f_y(x')).
  double value_full = 0.0;
  double value_empty = 0.0;
  double sum_std_error = 0.0;  // standard error of the per-sample sum of marginals
  double sum_rule_residual = 0.0;

  std::size_t size() const { return values.size(); }
  double total() const;

  nlohmann::json to_json() const;
  static Attribution from_json(const nlohmann::json& doc);
};

std::vector<std::string> default_feature_names(std::size_t n);

}  // namespace onshap
