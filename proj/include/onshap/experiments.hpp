#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "onshap/attribution.hpp"
#include "onshap/dataset.hpp"
#include "onshap/generators.hpp"
#include "onshap/harness.hpp"
#include "onshap/imputer.hpp"
#include "onshap/isolation_forest.hpp"
#include "onshap/metrics.hpp"
#include "onshap/mlp.hpp"
#include "onshap/shapley.hpp"
#include "onshap/surrogate.hpp"
#include "onshap/trees.hpp"
#include "onshap/value_functions.hpp"

namespace onshap {

// ---------------------------------------------------------------- data

/// Where a recipe's data comes from. Without a path, a generated stand-in is
/// used if the preset has one and `allow_standin` is set.
struct DataSource {
  std::string preset;  // drug, abalone, census, mnist
  std::optional<std::filesystem::path> path;         // tabular file or IDX images
  std::optional<std::filesystem::path> labels_path;  // IDX labels
  bool allow_standin = false;
  std::size_t standin_rows = 0;  // 0 = preset default
  std::size_t limit = 0;         // keep at most this many rows (0 = all)

  nlohmann::json to_json() const;
  static DataSource from_json(const nlohmann::json& doc);
};

Dataset acquire_dataset(const DataSource& source, std::uint64_t seed);

// ---------------------------------------------------------------- config I/O

nlohmann::json to_json(const MlpConfig& cfg);
MlpConfig mlp_config_from_json(const nlohmann::json& doc, const MlpConfig& defaults);
nlohmann::json to_json(const ForestConfig& cfg);
ForestConfig forest_config_from_json(const nlohmann::json& doc, const ForestConfig& defaults);
nlohmann::json to_json(const SurrogateConfig& cfg);
SurrogateConfig surrogate_config_from_json(const nlohmann::json& doc, const SurrogateConfig& defaults);
nlohmann::json to_json(const IsolationForestConfig& cfg);
IsolationForestConfig isolation_config_from_json(const nlohmann::json& doc,
                                                 const IsolationForestConfig& defaults);

// ---------------------------------------------------------------- pipelines

/// Explained model and on-manifold machinery for one tabular/image dataset.
struct PipelineConfig {
  std::string model_kind = "mlp";  // mlp or random_forest
  MlpConfig mlp;
  ForestConfig forest;
  SurrogateConfig surrogate;
  ImputerHyper imputer;
  bool grid_search = false;  // neighbourhood of the defaults, selected by validation MSE
  std::size_t n_inner_global = 1;  // inner draws per coalition for global values
  std::size_t n_inner_mse = 16;    // inner draws per coalition for the MSE metric
  std::size_t max_background = 0;  // cap on background rows for the off-manifold vf (0 = all)

  /// Per-dataset defaults (explained model and best-known hyperparameters);
  /// an empty preset gives generic settings.
  static PipelineConfig defaults(const std::string& preset);
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& doc, const PipelineConfig& defaults);
};

/// Fitted pieces shared by the tabular and image recipes. Built through a
/// StageRunner so reruns load every trained component from the cache.
struct Pipeline {
  Dataset data;
  PipelineConfig cfg;
  ModelPtr model;
  std::string model_fingerprint;
  double test_accuracy = 0.0;
  std::shared_ptr<const Surrogate> surrogate;
  std::shared_ptr<const Imputer> imputer;
  std::shared_ptr<const EmpiricalConditionalContext> empirical;  // all-binary data only
  std::shared_ptr<const Matrix> background;

  Matrix train_x() const;
  Matrix validation_x() const;
  Matrix test_x() const;
  std::vector<int> test_y() const;

  bool supports(VfMethod method) const;
  VfFactory factory(VfMethod method, std::size_t n_inner) const;
};

/// Fits (or loads) the model; surrogate and imputer are built when requested.
/// `replicate` reseeds only the surrogate and imputer, keeping the model fixed.
Pipeline build_pipeline(StageRunner& stages, Dataset data, const PipelineConfig& cfg,
                        std::uint64_t seed, bool with_surrogate, bool with_imputer,
                        std::uint64_t replicate = 0);

/// Same pipeline explaining a different model over the same data.
Pipeline with_model(const Pipeline& p, ModelPtr model);

/// Global values on the test rows, through the stage cache.
Attribution pipeline_global(StageRunner& stages, const Pipeline& p, VfMethod method,
                            std::size_t n_samples, std::uint64_t seed,
                            SizeProfile* profile = nullptr);

// ---------------------------------------------------------------- outlier study

struct OutlierStudyConfig {
  std::vector<double> sigmas = {0.01, 0.03, 0.05, 0.07, 0.09, 0.11, 0.13, 0.15};
  std::size_t n_points = 10000;
  double outlier_fraction = 0.01;
  IsolationForestConfig forest{400, 256, 0};
  std::size_t n_permutations = 1000;
  std::size_t n_inner = 1;
  bool antithetic = true;
  std::size_t max_outliers = 0;  // 0 explains every outlier
  double histogram_sigma = 0.05;
  std::size_t histogram_coalitions = 4000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static OutlierStudyConfig from_json(const nlohmann::json& doc, const OutlierStudyConfig& defaults);
};

struct OutlierSigmaResult {
  double sigma = 0.0;
  double forest_accuracy = 0.0;  // raw score > 0 versus the outlier label
  std::size_t n_explained = 0;
  double off_error_rate = 0.0;
  double on_error_rate = 0.0;
  Attribution off_example;  // first outlier in row order
  Attribution on_example;

  nlohmann::json to_json() const;
  static OutlierSigmaResult from_json(const nlohmann::json& doc);
};

/// Model outputs on data and on Shapley coalitions of the outliers. Inlier
/// coalitions exclude every flipped feature; outlier coalitions include all.
struct CoalitionOutputs {
  double sigma = 0.0;
  std::vector<double> data_inliers;
  std::vector<double> data_outliers;
  std::vector<double> off_inlier_coalitions;
  std::vector<double> on_inlier_coalitions;
  std::vector<double> off_outlier_coalitions;
  std::vector<double> on_outlier_coalitions;

  double ks_on_inlier() const;   // against data_inliers
  double ks_off_inlier() const;
  double ks_on_outlier() const;  // against data_outliers
  double ks_off_outlier() const;
  nlohmann::json to_json() const;
  static CoalitionOutputs from_json(const nlohmann::json& doc);
};

struct OutlierStudyResult {
  std::vector<OutlierSigmaResult> per_sigma;
  CoalitionOutputs coalition_outputs;

  std::string error_rate_csv() const;
  nlohmann::json to_json() const;
  static OutlierStudyResult from_json(const nlohmann::json& doc);
};

OutlierSigmaResult run_outlier_sigma(StageRunner& stages, const OutlierStudyConfig& cfg, double sigma);
CoalitionOutputs run_coalition_outputs(StageRunner& stages, const OutlierStudyConfig& cfg);
OutlierStudyResult run_outlier_study(StageRunner& stages, const OutlierStudyConfig& cfg);

// ---------------------------------------------------------------- two features

struct TwoFeatureConfig {
  JointTable table = JointTable::default_table();
  std::size_t n_points = 10000;
  std::size_t n_global_samples = 100000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TwoFeatureConfig from_json(const nlohmann::json& doc, const TwoFeatureConfig& defaults);
};

struct TwoFeatureResult {
  std::array<std::array<double, 2>, 2> tree_p1{};  // fitted p(y=1 | x0, x1)
  Attribution off_manifold;
  Attribution on_manifold;

  nlohmann::json to_json() const;
  static TwoFeatureResult from_json(const nlohmann::json& doc);
};

TwoFeatureResult run_two_feature_globals(StageRunner& stages, const TwoFeatureConfig& cfg);

// ---------------------------------------------------------------- Drug

struct DrugConfig {
  DataSource source{"drug", std::nullopt, std::nullopt, false, 0, 0};
  PipelineConfig pipeline = PipelineConfig::defaults("drug");
  std::size_t off_samples = 100000;
  std::size_t empirical_samples = 100000;
  std::size_t supervised_samples = 10000;
  std::size_t unsupervised_samples = 100000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static DrugConfig from_json(const nlohmann::json& doc, const DrugConfig& defaults);
};

struct DrugValidationResult {
  std::string data_provenance;  // "file" or "stand-in"
  double test_accuracy = 0.0;
  double positive_rate = 0.0;
  Attribution off_manifold;
  Attribution empirical;
  Attribution supervised;
  Attribution unsupervised;

  nlohmann::json to_json() const;
  static DrugValidationResult from_json(const nlohmann::json& doc);
};

DrugValidationResult run_drug_validation(StageRunner& stages, const DrugConfig& cfg);

struct DrugRetrainingResult {
  Attribution retraining;  // exact over all coalitions
  Attribution empirical;
  std::size_t fits = 0;

  nlohmann::json to_json() const;
  static DrugRetrainingResult from_json(const nlohmann::json& doc);
};

DrugRetrainingResult run_drug_retraining(StageRunner& stages, const DrugConfig& cfg);

// ---------------------------------------------------------------- MSE table

struct MseTableConfig {
  std::vector<DataSource> datasets;
  std::vector<std::string> methods = {"off", "unsupervised", "supervised", "empirical"};
  std::size_t n_samples = 10000;
  std::size_t n_retrainings = 3;
  nlohmann::json pipeline_overrides = nlohmann::json::object();  // per preset
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static MseTableConfig from_json(const nlohmann::json& doc, const MseTableConfig& defaults);
};

struct MseTableResult {
  std::vector<MseReport> rows;  // aggregated over retrainings
  std::vector<std::vector<MseReport>> runs;  // per row, one report per retraining

  std::string csv() const { return mse_table_csv(rows); }
  nlohmann::json to_json() const;
  static MseTableResult from_json(const nlohmann::json& doc);
};

/// Table-1 style rows; the empirical method is skipped unless every feature is binary.
MseTableResult run_mse_table(StageRunner& stages, const MseTableConfig& cfg);

// ---------------------------------------------------------------- Abalone

struct AbaloneConfig {
  DataSource source{"abalone", std::nullopt, std::nullopt, false, 0, 0};
  PipelineConfig pipeline = PipelineConfig::defaults("abalone");
  std::size_t off_samples = 100000;
  std::size_t supervised_samples = 10000;
  std::size_t unsupervised_samples = 100000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static AbaloneConfig from_json(const nlohmann::json& doc, const AbaloneConfig& defaults);
};

struct AbaloneResult {
  double test_accuracy = 0.0;
  Attribution off_manifold;
  Attribution supervised;
  Attribution unsupervised;

  nlohmann::json to_json() const;
  static AbaloneResult from_json(const nlohmann::json& doc);
};

AbaloneResult run_abalone_globals(StageRunner& stages, const AbaloneConfig& cfg);

// ---------------------------------------------------------------- Census suppression

struct CensusConfig {
  DataSource source{"census", std::nullopt, std::nullopt, true, 10000, 0};
  PipelineConfig pipeline = PipelineConfig::defaults("census");
  std::string sensitive_feature = "sex";
  double alpha = 3.0;
  std::size_t finetune_epochs = 200;
  std::size_t global_samples = 20000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static CensusConfig from_json(const nlohmann::json& doc, const CensusConfig& defaults);
};

struct CensusResult {
  std::string data_provenance;
  std::size_t sensitive_index = 0;
  double original_accuracy = 0.0;
  double suppressed_accuracy = 0.0;
  double agreement = 0.0;  // on the test rows
  double gap_before = 0.0;
  double gap_after = 0.0;
  Attribution original_off;
  Attribution original_on;
  Attribution suppressed_off;
  Attribution suppressed_on;

  nlohmann::json to_json() const;
  static CensusResult from_json(const nlohmann::json& doc);
};

CensusResult run_census_suppression(StageRunner& stages, const CensusConfig& cfg);

// ---------------------------------------------------------------- MNIST

struct MnistConfig {
  DataSource source{"mnist", std::nullopt, std::nullopt, false, 0, 10000};
  PipelineConfig pipeline = PipelineConfig::defaults("mnist");
  std::size_t n_digits = 10;
  std::size_t samples_per_pixel = 1000;  // permutations per local explanation
  std::size_t summand_samples = 20000;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static MnistConfig from_json(const nlohmann::json& doc, const MnistConfig& defaults);
};

struct MnistDigit {
  std::size_t test_index = 0;  // row in the dataset
  int predicted_class = 0;
  Attribution off_manifold;
  Attribution on_manifold;  // supervised surrogate
  SumRuleReport off_sum_rule;
  SumRuleReport on_sum_rule;
  double off_gini = 0.0;
  double on_gini = 0.0;
};

struct MnistLocalResult {
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  double test_accuracy = 0.0;
  std::vector<MnistDigit> digits;

  nlohmann::json to_json() const;
  static MnistLocalResult from_json(const nlohmann::json& doc);
};

MnistLocalResult run_mnist_local(StageRunner& stages, const MnistConfig& cfg);

struct MnistSummandResult {
  nlohmann::json off_profile;
  nlohmann::json on_profile;
  double off_small_mass = 0.0;
  double on_small_mass = 0.0;

  nlohmann::json to_json() const;
  static MnistSummandResult from_json(const nlohmann::json& doc);
};

MnistSummandResult run_mnist_summand(StageRunner& stages, const MnistConfig& cfg);

// ---------------------------------------------------------------- recipes

inline const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names = {
      "drug_validation", "drug_retraining", "outlier_error_rates", "two_feature_globals",
      "abalone_globals", "census_suppression", "mnist_local", "mnist_summand", "mse_table"};
  return names;
}

/// Runs a recipe end to end, writing results, CSV tables, SVG charts and
/// out_dir/manifest.json. `config` overrides the recipe defaults. On failure
/// the partial manifest is written before the error propagates.
nlohmann::json run_recipe(const std::string& name, const std::filesystem::path& out_dir,
                          std::uint64_t seed, const nlohmann::json& config, bool use_cache = true);

/// report table1 | fig3 | fig4 from a completed recipe directory.
std::vector<std::filesystem::path> write_report(const std::string& which,
                                                const std::filesystem::path& run_dir,
                                                const std::filesystem::path& out_dir);

}  // namespace onshap
