#include "onshap/attribution.hpp"

#include "onshap/common.hpp"

namespace onshap {

double Attribution::total() const {
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  return sum.value();
}

nlohmann::json Attribution::to_json() const {
  nlohmann::json doc = {{"format", "onshap-attribution"},
                        {"version", 1},
                        {"scope", scope == AttributionScope::local ? "local" : "global"},
                        {"value_function_id", value_function_id},
                        {"exact", exact},
                        {"n_samples", n_samples},
                        {"seed", seed},
                        {"feature_names", feature_names},
                        {"values", values},
                        {"std_errors", std_errors},
                        {"value_full", value_full},
                        {"value_empty", value_empty},
                        {"sum_std_error", sum_std_error},
                        {"sum_rule_residual", sum_rule_residual}};
  doc["point_index"] = point_index ? nlohmann::json(*point_index) : nlohmann::json(nullptr);
  doc["target_class"] = target_class ? nlohmann::json(*target_class) : nlohmann::json(nullptr);
  return doc;
}

Attribution Attribution::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "onshap-attribution" || doc.value("version", 0) != 1) {
    throw DataError("not a version-1 attribution document");
  }
  Attribution a;
  a.scope = doc.at("scope").get<std::string>() == "local" ? AttributionScope::local
                                                          : AttributionScope::global;
  a.value_function_id = doc.at("value_function_id").get<std::string>();
  a.exact = doc.at("exact").get<bool>();
  a.n_samples = doc.at("n_samples").get<std::size_t>();
  a.seed = doc.at("seed").get<std::uint64_t>();
  a.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  a.values = doc.at("values").get<std::vector<double>>();
  a.std_errors = doc.at("std_errors").get<std::vector<double>>();
  a.value_full = doc.at("value_full").get<double>();
  a.value_empty = doc.at("value_empty").get<double>();
  a.sum_std_error = doc.at("sum_std_error").get<double>();
  a.sum_rule_residual = doc.at("sum_rule_residual").get<double>();
  if (!doc.at("point_index").is_null()) a.point_index = doc.at("point_index").get<std::size_t>();
  if (!doc.at("target_class").is_null()) a.target_class = doc.at("target_class").get<int>();
  if (a.values.size() != a.std_errors.size() || a.values.size() != a.feature_names.size()) {
    throw DataError("attribution arrays differ in length");
  }
  return a;
}

std::vector<std::string> default_feature_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

}  // namespace onshap
