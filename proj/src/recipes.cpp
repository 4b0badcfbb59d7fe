#include <algorithm>
#include <cstdio>
#include <sstream>

#include "onshap/artifacts.hpp"
#include "onshap/experiments.hpp"
#include "onshap/svg.hpp"

namespace onshap {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct NamedAttribution {
  std::string name;
  const Attribution* attribution;
};

std::string globals_csv(const std::vector<NamedAttribution>& columns) {
  std::ostringstream out;
  out << "feature";
  for (const auto& c : columns) out << ',' << c.name << ',' << c.name << "_std_error";
  out << '\n';
  const Attribution& first = *columns.front().attribution;
  for (std::size_t i = 0; i < first.size(); ++i) {
    out << (i < first.feature_names.size() ? first.feature_names[i] : "x" + std::to_string(i));
    for (const auto& c : columns) {
      const Attribution& a = *c.attribution;
      out << ',' << num(a.values[i]) << ','
          << num(i < a.std_errors.size() ? a.std_errors[i] : 0.0);
    }
    out << '\n';
  }
  return out.str();
}

std::string globals_svg(const std::string& title, const std::vector<NamedAttribution>& columns) {
  std::vector<BarSeries> series;
  for (const auto& c : columns) series.push_back({c.name, c.attribution->values, c.attribution->std_errors});
  std::vector<std::string> names = columns.front().attribution->feature_names;
  if (names.size() != columns.front().attribution->size()) {
    names = default_feature_names(columns.front().attribution->size());
  }
  return bar_chart_svg(title, names, series);
}

void write_globals(StageRunner& stages, const std::string& title,
                   const std::vector<NamedAttribution>& columns) {
  stages.write_artifact("globals.csv", globals_csv(columns), "csv");
  stages.write_artifact("globals.svg", globals_svg(title, columns), "svg");
}

void write_result(StageRunner& stages, const nlohmann::json& result) {
  stages.write_artifact("result.json", result.dump(2) + "\n", "json");
}

std::string outlier_error_svg(const OutlierStudyResult& r) {
  LineSeries off{"off-manifold", {}, {}}, on{"on-manifold", {}, {}};
  for (const auto& s : r.per_sigma) {
    off.x.push_back(s.sigma);
    off.y.push_back(s.off_error_rate);
    on.x.push_back(s.sigma);
    on.y.push_back(s.on_error_rate);
  }
  return line_chart_svg("Outlier explanation error rate", "noise sigma", "error rate", {off, on});
}

std::string inlier_histogram_svg(const CoalitionOutputs& c) {
  return histogram_svg("Inlier coalitions, sigma = " + num(c.sigma),
                       {{"data inliers", c.data_inliers},
                        {"on-manifold coalitions", c.on_inlier_coalitions},
                        {"off-manifold coalitions", c.off_inlier_coalitions}});
}

std::string outlier_histogram_svg(const CoalitionOutputs& c) {
  return histogram_svg("Outlier coalitions, sigma = " + num(c.sigma),
                       {{"data outliers", c.data_outliers},
                        {"on-manifold coalitions", c.on_outlier_coalitions},
                        {"off-manifold coalitions", c.off_outlier_coalitions}});
}

std::string two_feature_svg(const TwoFeatureResult& r) {
  return globals_svg("Global Shapley values, two-feature example",
                     {{"off-manifold", &r.off_manifold}, {"on-manifold", &r.on_manifold}});
}

std::string mse_markdown(const MseTableResult& r) {
  std::ostringstream out;
  out << "| dataset | method | MSE | std. error | samples |\n|---|---|---|---|---|\n";
  for (const auto& row : r.rows) {
    out << "| " << row.dataset_id << " | " << row.method_id << " | " << fixed4(row.mse)
        << " | " << fixed4(row.std_error) << " | " << row.n_samples << " |\n";
  }
  return out.str();
}

std::vector<DataSource> default_mse_datasets() {
  return {{"drug", std::nullopt, std::nullopt, false, 0, 0},
          {"abalone", std::nullopt, std::nullopt, false, 0, 0},
          {"census", std::nullopt, std::nullopt, true, 10000, 0}};
}

template <typename Config>
Config configured(const nlohmann::json& config, std::uint64_t seed) {
  Config c = Config::from_json(config, Config{});
  if (!config.contains("seed")) c.seed = seed;
  return c;
}

nlohmann::json run_stages(StageRunner& stages, const std::string& name, std::uint64_t seed,
                          const nlohmann::json& config) {
  if (name == "drug_validation") {
    const auto cfg = configured<DrugConfig>(config, seed);
    const DrugValidationResult r = run_drug_validation(stages, cfg);
    write_result(stages, r.to_json());
    write_globals(stages, "Drug consumption: global Shapley values",
                  {{"off-manifold", &r.off_manifold},
                   {"empirical", &r.empirical},
                   {"supervised", &r.supervised},
                   {"unsupervised", &r.unsupervised}});
    return cfg.to_json();
  }
  if (name == "drug_retraining") {
    const auto cfg = configured<DrugConfig>(config, seed);
    const DrugRetrainingResult r = run_drug_retraining(stages, cfg);
    write_result(stages, r.to_json());
    write_globals(stages, "Drug consumption: retraining game",
                  {{"retraining", &r.retraining}, {"empirical", &r.empirical}});
    return cfg.to_json();
  }
  if (name == "outlier_error_rates") {
    const auto cfg = configured<OutlierStudyConfig>(config, seed);
    const OutlierStudyResult r = run_outlier_study(stages, cfg);
    write_result(stages, r.to_json());
    stages.write_artifact("error_rates.csv", r.error_rate_csv(), "csv");
    stages.write_artifact("error_rates.svg", outlier_error_svg(r), "svg");
    stages.write_artifact("inlier_coalitions.svg", inlier_histogram_svg(r.coalition_outputs), "svg");
    stages.write_artifact("outlier_coalitions.svg", outlier_histogram_svg(r.coalition_outputs), "svg");
    return cfg.to_json();
  }
  if (name == "two_feature_globals") {
    const auto cfg = configured<TwoFeatureConfig>(config, seed);
    const TwoFeatureResult r = run_two_feature_globals(stages, cfg);
    write_result(stages, r.to_json());
    stages.write_artifact("globals.csv",
                          globals_csv({{"off-manifold", &r.off_manifold}, {"on-manifold", &r.on_manifold}}),
                          "csv");
    stages.write_artifact("globals.svg", two_feature_svg(r), "svg");
    return cfg.to_json();
  }
  if (name == "abalone_globals") {
    const auto cfg = configured<AbaloneConfig>(config, seed);
    const AbaloneResult r = run_abalone_globals(stages, cfg);
    write_result(stages, r.to_json());
    write_globals(stages, "Abalone: global Shapley values",
                  {{"off-manifold", &r.off_manifold},
                   {"supervised", &r.supervised},
                   {"unsupervised", &r.unsupervised}});
    return cfg.to_json();
  }
  if (name == "census_suppression") {
    const auto cfg = configured<CensusConfig>(config, seed);
    const CensusResult r = run_census_suppression(stages, cfg);
    write_result(stages, r.to_json());
    write_globals(stages, "Census: suppression fine-tuning",
                  {{"original off-manifold", &r.original_off},
                   {"suppressed off-manifold", &r.suppressed_off},
                   {"original on-manifold", &r.original_on},
                   {"suppressed on-manifold", &r.suppressed_on}});
    return cfg.to_json();
  }
  if (name == "mnist_local") {
    const auto cfg = configured<MnistConfig>(config, seed);
    const MnistLocalResult r = run_mnist_local(stages, cfg);
    write_result(stages, r.to_json());
    std::ostringstream csv;
    csv << "row,predicted_class,off_gini,on_gini,off_sum_residual,off_sum_std_error,on_sum_residual,"
           "on_sum_std_error\n";
    for (const auto& d : r.digits) {
      csv << d.test_index << ',' << d.predicted_class << ',' << num(d.off_gini) << ','
          << num(d.on_gini) << ',' << num(d.off_sum_rule.residual)
          << ',' << num(d.off_sum_rule.std_error) << ','
          << num(d.on_sum_rule.residual) << ','
          << num(d.on_sum_rule.std_error) << '\n';
      if (r.image_rows * r.image_cols == d.off_manifold.size()) {
        stages.write_artifact("digit_" + std::to_string(d.test_index) + "_off.svg",
                              heatmap_svg("Row " + std::to_string(d.test_index) + ": off-manifold",
                                          d.off_manifold.values, r.image_rows, r.image_cols),
                              "svg");
        stages.write_artifact("digit_" + std::to_string(d.test_index) + "_on.svg",
                              heatmap_svg("Row " + std::to_string(d.test_index) + ": on-manifold",
                                          d.on_manifold.values, r.image_rows, r.image_cols),
                              "svg");
      }
    }
    stages.write_artifact("digits.csv", csv.str(), "csv");
    return cfg.to_json();
  }
  if (name == "mnist_summand") {
    const auto cfg = configured<MnistConfig>(config, seed);
    const MnistSummandResult r = run_mnist_summand(stages, cfg);
    write_result(stages, r.to_json());
    const SizeProfile off = SizeProfile::from_json(r.off_profile);
    const SizeProfile on = SizeProfile::from_json(r.on_profile);
    const std::vector<double> off_abs = off.mean_abs(), on_abs = on.mean_abs();
    std::ostringstream csv;
    csv << "coalition_size,off_mean_abs,on_mean_abs,off_count,on_count\n";
    LineSeries off_line{"off-manifold", {}, {}}, on_line{"on-manifold", {}, {}};
    for (std::size_t k = 0; k < off_abs.size(); ++k) {
      csv << k << ',' << num(off_abs[k]) << ',' << num(on_abs[k])
          << ',' << off.count(k) << ',' << on.count(k) << '\n';
      off_line.x.push_back(static_cast<double>(k));
      off_line.y.push_back(off_abs[k]);
      on_line.x.push_back(static_cast<double>(k));
      on_line.y.push_back(on_abs[k]);
    }
    stages.write_artifact("summand_profile.csv", csv.str(), "csv");
    stages.write_artifact("summand_profile.svg",
                          line_chart_svg("Mean |marginal| by coalition size", "coalition size",
                                         "mean |marginal|", {off_line, on_line}),
                          "svg");
    return cfg.to_json();
  }
  if (name == "mse_table") {
    MseTableConfig defaults;
    defaults.datasets = default_mse_datasets();
    MseTableConfig cfg = MseTableConfig::from_json(config, defaults);
    if (!config.contains("seed")) cfg.seed = seed;
    const MseTableResult r = run_mse_table(stages, cfg);
    write_result(stages, r.to_json());
    stages.write_artifact("table1.csv", r.csv(), "csv");
    stages.write_artifact("table1.md", mse_markdown(r), "markdown");
    return cfg.to_json();
  }
  throw UsageError("unknown recipe '" + name + "'");
}

}  // namespace

nlohmann::json run_recipe(const std::string& name, const std::filesystem::path& out_dir,
                          std::uint64_t seed, const nlohmann::json& config, bool use_cache) {
  const auto& names = recipe_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw UsageError("unknown recipe '" + name + "'");
  }
  StageRunner stages(out_dir, use_cache);
  nlohmann::json resolved = config;
  try {
    resolved = run_stages(stages, name, seed, config.is_null() ? nlohmann::json::object() : config);
  } catch (const std::exception& e) {
    stages.record_failure(stages.current_stage(), e.what());
    write_file_atomic(out_dir / "manifest.json", stages.manifest(name, seed, resolved).dump(2) + "\n");
    throw;
  }
  nlohmann::json manifest = stages.manifest(name, seed, resolved);
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<std::filesystem::path> write_report(const std::string& which,
                                                const std::filesystem::path& run_dir,
                                                const std::filesystem::path& out_dir) {
  const std::filesystem::path result_path = run_dir / "result.json";
  if (!std::filesystem::exists(result_path)) {
    throw DataError("no result.json in " + run_dir.string() + "; run the matching recipe first");
  }
  const nlohmann::json result = read_json(result_path);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& file, const std::string& content) {
    write_file_atomic(out_dir / file, content);
    written.push_back(out_dir / file);
  };
  try {
    if (which == "table1") {
      const MseTableResult r = MseTableResult::from_json(result);
      emit("table1.csv", r.csv());
      emit("table1.md", mse_markdown(r));
    } else if (which == "fig3") {
      const OutlierStudyResult r = OutlierStudyResult::from_json(result);
      emit("fig3_error_rates.csv", r.error_rate_csv());
      emit("fig3_error_rates.svg", outlier_error_svg(r));
      emit("fig3_inlier_coalitions.svg", inlier_histogram_svg(r.coalition_outputs));
      emit("fig3_outlier_coalitions.svg", outlier_histogram_svg(r.coalition_outputs));
    } else if (which == "fig4") {
      const TwoFeatureResult r = TwoFeatureResult::from_json(result);
      emit("fig4_globals.csv",
           globals_csv({{"off-manifold", &r.off_manifold}, {"on-manifold", &r.on_manifold}}));
      emit("fig4_globals.svg", two_feature_svg(r));
    } else {
      throw UsageError("unknown report '" + which + "' (expected table1, fig3 or fig4)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("result.json in " + run_dir.string() + " does not match report " + which + ": " +
                    e.what());
  }
  return written;
}

}  // namespace onshap
