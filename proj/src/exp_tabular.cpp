#include <algorithm>

#include "onshap/experiments.hpp"
#include "onshap/model_io.hpp"
#include "onshap/suppression.hpp"

namespace onshap {
namespace {

PipelineConfig pipeline_from(const nlohmann::json& doc, const char* key, const PipelineConfig& defaults) {
  return doc.contains(key) ? PipelineConfig::from_json(doc.at(key), defaults) : defaults;
}

DataSource source_from(const nlohmann::json& doc, const DataSource& defaults) {
  if (!doc.contains("source")) return defaults;
  nlohmann::json merged = defaults.to_json();
  merged.merge_patch(doc.at("source"));
  return DataSource::from_json(merged);
}

std::string provenance_of(const Dataset& d) {
  return d.provenance.value("origin", std::string("file"));
}

std::string method_label(VfMethod m) {
  switch (m) {
    case VfMethod::off_manifold:
      return "off-manifold";
    case VfMethod::empirical_conditional:
      return "empirical";
    case VfMethod::generative:
      return "unsupervised";
    case VfMethod::surrogate:
      return "supervised";
    case VfMethod::retraining:
      return "retraining";
  }
  return "unknown";
}

std::size_t feature_index(const Dataset& d, const std::string& name) {
  const auto names = d.feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("dataset has no feature named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

ModelTrainer forest_trainer(const ForestConfig& cfg, std::size_t n_classes) {
  return [cfg, n_classes](const Matrix& x, std::span<const int> y, std::uint64_t seed) -> ModelPtr {
    return std::make_shared<RandomForest>(fit_random_forest(x, y, n_classes, cfg, seed));
  };
}

}  // namespace

// ---------------------------------------------------------------- Drug

nlohmann::json DrugConfig::to_json() const {
  return {{"source", source.to_json()},
          {"pipeline", pipeline.to_json()},
          {"off_samples", off_samples},
          {"empirical_samples", empirical_samples},
          {"supervised_samples", supervised_samples},
          {"unsupervised_samples", unsupervised_samples},
          {"seed", seed}};
}

DrugConfig DrugConfig::from_json(const nlohmann::json& doc, const DrugConfig& defaults) {
  DrugConfig c = defaults;
  c.source = source_from(doc, c.source);
  c.pipeline = pipeline_from(doc, "pipeline", c.pipeline);
  c.off_samples = doc.value("off_samples", c.off_samples);
  c.empirical_samples = doc.value("empirical_samples", c.empirical_samples);
  c.supervised_samples = doc.value("supervised_samples", c.supervised_samples);
  c.unsupervised_samples = doc.value("unsupervised_samples", c.unsupervised_samples);
  c.seed = doc.value("seed", c.seed);
  return c;
}

nlohmann::json DrugValidationResult::to_json() const {
  return {{"data_provenance", data_provenance},
          {"test_accuracy", test_accuracy},
          {"positive_rate", positive_rate},
          {"off_manifold", off_manifold.to_json()},
          {"empirical", empirical.to_json()},
          {"supervised", supervised.to_json()},
          {"unsupervised", unsupervised.to_json()}};
}

DrugValidationResult DrugValidationResult::from_json(const nlohmann::json& doc) {
  DrugValidationResult r;
  r.data_provenance = doc.at("data_provenance").get<std::string>();
  r.test_accuracy = doc.at("test_accuracy").get<double>();
  r.positive_rate = doc.at("positive_rate").get<double>();
  r.off_manifold = Attribution::from_json(doc.at("off_manifold"));
  r.empirical = Attribution::from_json(doc.at("empirical"));
  r.supervised = Attribution::from_json(doc.at("supervised"));
  r.unsupervised = Attribution::from_json(doc.at("unsupervised"));
  return r;
}

DrugValidationResult run_drug_validation(StageRunner& stages, const DrugConfig& cfg) {
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline p = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, true, true);
  DrugValidationResult r;
  r.data_provenance = provenance_of(p.data);
  r.test_accuracy = p.test_accuracy;
  const std::vector<double> freq = p.data.class_frequencies(p.data.split.test);
  r.positive_rate = freq.size() > 1 ? freq[1] : 0.0;
  r.off_manifold = pipeline_global(stages, p, VfMethod::off_manifold, cfg.off_samples, cfg.seed);
  r.empirical = pipeline_global(stages, p, VfMethod::empirical_conditional, cfg.empirical_samples, cfg.seed);
  r.supervised = pipeline_global(stages, p, VfMethod::surrogate, cfg.supervised_samples, cfg.seed);
  r.unsupervised = pipeline_global(stages, p, VfMethod::generative, cfg.unsupervised_samples, cfg.seed);
  return r;
}

nlohmann::json DrugRetrainingResult::to_json() const {
  return {{"retraining", retraining.to_json()}, {"empirical", empirical.to_json()}, {"fits", fits}};
}

DrugRetrainingResult DrugRetrainingResult::from_json(const nlohmann::json& doc) {
  return {Attribution::from_json(doc.at("retraining")), Attribution::from_json(doc.at("empirical")),
          doc.at("fits").get<std::size_t>()};
}

DrugRetrainingResult run_drug_retraining(StageRunner& stages, const DrugConfig& cfg) {
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline p = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, false, false);
  DrugRetrainingResult r;
  r.empirical = pipeline_global(stages, p, VfMethod::empirical_conditional, cfg.empirical_samples, cfg.seed);
  const std::string data_fp = p.data.fingerprint();
  const nlohmann::json key = {{"data", data_fp}, {"forest", to_json(cfg.pipeline.forest)}, {"seed", cfg.seed}};
  const nlohmann::json doc = stages.run("retraining_game", key, true, [&] {
    auto cache = std::make_shared<RetrainingCache>(stages.out_dir() / "retraining_cache.jsonl");
    RetrainingGame game(p.train_x(), p.data.labels_of(p.data.split.train), p.test_x(), p.test_y(),
                        p.data.n_classes, forest_trainer(cfg.pipeline.forest, p.data.n_classes),
                        derive_seed(cfg.seed, 0x9e), data_fp, cache);
    game.prefetch_all();
    Attribution a = shapley_exact(game, cfg.seed);
    a.scope = AttributionScope::global;
    a.feature_names = p.data.feature_names();
    return nlohmann::json{{"attribution", a.to_json()}, {"fits", game.fits_performed()}};
  });
  r.retraining = Attribution::from_json(doc.at("attribution"));
  r.fits = doc.at("fits").get<std::size_t>();
  return r;
}

// ---------------------------------------------------------------- MSE table

nlohmann::json MseTableConfig::to_json() const {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& d : datasets) sources.push_back(d.to_json());
  return {{"datasets", sources},
          {"methods", methods},
          {"n_samples", n_samples},
          {"n_retrainings", n_retrainings},
          {"pipeline_overrides", pipeline_overrides},
          {"seed", seed}};
}

MseTableConfig MseTableConfig::from_json(const nlohmann::json& doc, const MseTableConfig& defaults) {
  MseTableConfig c = defaults;
  if (doc.contains("datasets")) {
    c.datasets.clear();
    for (const auto& d : doc.at("datasets")) c.datasets.push_back(DataSource::from_json(d));
  }
  c.methods = doc.value("methods", c.methods);
  c.n_samples = doc.value("n_samples", c.n_samples);
  c.n_retrainings = doc.value("n_retrainings", c.n_retrainings);
  if (doc.contains("pipeline_overrides")) c.pipeline_overrides = doc.at("pipeline_overrides");
  c.seed = doc.value("seed", c.seed);
  if (c.n_retrainings == 0) throw UsageError("n_retrainings must be at least 1");
  return c;
}

nlohmann::json MseTableResult::to_json() const {
  nlohmann::json out_rows = nlohmann::json::array(), out_runs = nlohmann::json::array();
  for (const auto& r : rows) out_rows.push_back(r.to_json());
  for (const auto& group : runs) {
    nlohmann::json g = nlohmann::json::array();
    for (const auto& r : group) g.push_back(r.to_json());
    out_runs.push_back(g);
  }
  return {{"rows", out_rows}, {"runs", out_runs}};
}

MseTableResult MseTableResult::from_json(const nlohmann::json& doc) {
  MseTableResult r;
  for (const auto& row : doc.at("rows")) r.rows.push_back(MseReport::from_json(row));
  for (const auto& group : doc.at("runs")) {
    std::vector<MseReport> g;
    for (const auto& row : group) g.push_back(MseReport::from_json(row));
    r.runs.push_back(std::move(g));
  }
  return r;
}

MseTableResult run_mse_table(StageRunner& stages, const MseTableConfig& cfg) {
  if (cfg.datasets.empty()) throw UsageError("mse_table needs at least one dataset");
  std::vector<VfMethod> methods;
  for (const auto& m : cfg.methods) methods.push_back(vf_method_from_string(m));
  MseTableResult result;
  for (const DataSource& source : cfg.datasets) {
    const Dataset data = acquire_dataset(source, derive_seed(cfg.seed, 0xd1));
    PipelineConfig pc = PipelineConfig::defaults(source.preset);
    if (cfg.pipeline_overrides.contains(source.preset)) {
      pc = PipelineConfig::from_json(cfg.pipeline_overrides.at(source.preset), pc);
    }
    const bool need_surrogate = std::count(methods.begin(), methods.end(), VfMethod::surrogate) > 0;
    const bool need_imputer = std::count(methods.begin(), methods.end(), VfMethod::generative) > 0;
    std::vector<std::vector<MseReport>> per_method(methods.size());
    for (std::size_t rep = 0; rep < cfg.n_retrainings; ++rep) {
      const Pipeline p = build_pipeline(stages, data, pc, cfg.seed, need_surrogate, need_imputer, rep);
      for (std::size_t k = 0; k < methods.size(); ++k) {
        if (!p.supports(methods[k])) continue;
        const VfMethod m = methods[k];
        const nlohmann::json key = {
            {"model", p.model_fingerprint},
            {"data", p.data.fingerprint()},
            {"method", to_string(m)},
            {"aux", m == VfMethod::surrogate    ? sha256_hex(p.surrogate->to_json().dump())
                    : m == VfMethod::generative ? sha256_hex(p.imputer->to_json().dump())
                                                : std::string()},
            {"n_inner", pc.n_inner_mse},
            {"max_background", pc.max_background},
            {"samples", cfg.n_samples},
            {"replicate", rep}};
        const nlohmann::json doc = stages.run("mse:" + to_string(m), key, false, [&] {
          MseReport report = value_function_mse(*p.model, p.factory(m, pc.n_inner_mse), p.test_x(),
                                                cfg.n_samples, derive_seed(cfg.seed, 0x3e, rep));
          report.method_id = method_label(m);
          report.dataset_id = p.data.name;
          return report.to_json();
        });
        per_method[k].push_back(MseReport::from_json(doc));
      }
    }
    for (auto& runs : per_method) {
      if (runs.empty()) continue;
      result.rows.push_back(aggregate_mse(runs));
      result.runs.push_back(std::move(runs));
    }
  }
  return result;
}

// ---------------------------------------------------------------- Abalone

nlohmann::json AbaloneConfig::to_json() const {
  return {{"source", source.to_json()},
          {"pipeline", pipeline.to_json()},
          {"off_samples", off_samples},
          {"supervised_samples", supervised_samples},
          {"unsupervised_samples", unsupervised_samples},
          {"seed", seed}};
}

AbaloneConfig AbaloneConfig::from_json(const nlohmann::json& doc, const AbaloneConfig& defaults) {
  AbaloneConfig c = defaults;
  c.source = source_from(doc, c.source);
  c.pipeline = pipeline_from(doc, "pipeline", c.pipeline);
  c.off_samples = doc.value("off_samples", c.off_samples);
  c.supervised_samples = doc.value("supervised_samples", c.supervised_samples);
  c.unsupervised_samples = doc.value("unsupervised_samples", c.unsupervised_samples);
  c.seed = doc.value("seed", c.seed);
  return c;
}

nlohmann::json AbaloneResult::to_json() const {
  return {{"test_accuracy", test_accuracy},
          {"off_manifold", off_manifold.to_json()},
          {"supervised", supervised.to_json()},
          {"unsupervised", unsupervised.to_json()}};
}

AbaloneResult AbaloneResult::from_json(const nlohmann::json& doc) {
  return {doc.at("test_accuracy").get<double>(), Attribution::from_json(doc.at("off_manifold")),
          Attribution::from_json(doc.at("supervised")), Attribution::from_json(doc.at("unsupervised"))};
}

AbaloneResult run_abalone_globals(StageRunner& stages, const AbaloneConfig& cfg) {
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline p = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, true, true);
  AbaloneResult r;
  r.test_accuracy = p.test_accuracy;
  r.off_manifold = pipeline_global(stages, p, VfMethod::off_manifold, cfg.off_samples, cfg.seed);
  r.supervised = pipeline_global(stages, p, VfMethod::surrogate, cfg.supervised_samples, cfg.seed);
  r.unsupervised = pipeline_global(stages, p, VfMethod::generative, cfg.unsupervised_samples, cfg.seed);
  return r;
}

// ---------------------------------------------------------------- Census

nlohmann::json CensusConfig::to_json() const {
  return {{"source", source.to_json()},
          {"pipeline", pipeline.to_json()},
          {"sensitive_feature", sensitive_feature},
          {"alpha", alpha},
          {"finetune_epochs", finetune_epochs},
          {"global_samples", global_samples},
          {"seed", seed}};
}

CensusConfig CensusConfig::from_json(const nlohmann::json& doc, const CensusConfig& defaults) {
  CensusConfig c = defaults;
  c.source = source_from(doc, c.source);
  c.pipeline = pipeline_from(doc, "pipeline", c.pipeline);
  c.sensitive_feature = doc.value("sensitive_feature", c.sensitive_feature);
  c.alpha = doc.value("alpha", c.alpha);
  c.finetune_epochs = doc.value("finetune_epochs", c.finetune_epochs);
  c.global_samples = doc.value("global_samples", c.global_samples);
  c.seed = doc.value("seed", c.seed);
  return c;
}

nlohmann::json CensusResult::to_json() const {
  return {{"data_provenance", data_provenance},
          {"sensitive_index", sensitive_index},
          {"original_accuracy", original_accuracy},
          {"suppressed_accuracy", suppressed_accuracy},
          {"agreement", agreement},
          {"gap_before", gap_before},
          {"gap_after", gap_after},
          {"original_off", original_off.to_json()},
          {"original_on", original_on.to_json()},
          {"suppressed_off", suppressed_off.to_json()},
          {"suppressed_on", suppressed_on.to_json()}};
}

CensusResult CensusResult::from_json(const nlohmann::json& doc) {
  CensusResult r;
  r.data_provenance = doc.at("data_provenance").get<std::string>();
  r.sensitive_index = doc.at("sensitive_index").get<std::size_t>();
  r.original_accuracy = doc.at("original_accuracy").get<double>();
  r.suppressed_accuracy = doc.at("suppressed_accuracy").get<double>();
  r.agreement = doc.at("agreement").get<double>();
  r.gap_before = doc.at("gap_before").get<double>();
  r.gap_after = doc.at("gap_after").get<double>();
  r.original_off = Attribution::from_json(doc.at("original_off"));
  r.original_on = Attribution::from_json(doc.at("original_on"));
  r.suppressed_off = Attribution::from_json(doc.at("suppressed_off"));
  r.suppressed_on = Attribution::from_json(doc.at("suppressed_on"));
  return r;
}

CensusResult run_census_suppression(StageRunner& stages, const CensusConfig& cfg) {
  if (cfg.pipeline.model_kind != "mlp") throw UsageError("suppression fine-tuning needs an mlp model");
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline original = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, false, true);
  CensusResult r;
  r.data_provenance = provenance_of(original.data);
  r.sensitive_index = feature_index(original.data, cfg.sensitive_feature);

  const nlohmann::json key = {{"model", original.model_fingerprint},
                              {"data", original.data.fingerprint()},
                              {"feature", r.sensitive_index},
                              {"alpha", cfg.alpha},
                              {"epochs", cfg.finetune_epochs},
                              {"train", cfg.pipeline.mlp.train.to_json()},
                              {"seed", cfg.seed}};
  const nlohmann::json doc = stages.run("suppression_finetune", key, true, [&] {
    const auto* base = dynamic_cast<const MlpClassifier*>(original.model.get());
    SuppressionConfig sc;
    sc.feature = r.sensitive_index;
    sc.alpha = cfg.alpha;
    sc.train = cfg.pipeline.mlp.train;
    sc.train.max_epochs = cfg.finetune_epochs;
    sc.train.patience.reset();
    sc.train.seed = derive_seed(cfg.seed, 0x5f);
    const auto& d = original.data;
    SuppressionResult s = suppress_feature_finetune(*base, original.train_x(), d.labels_of(d.split.train),
                                                    original.validation_x(),
                                                    d.labels_of(d.split.validation), sc);
    return nlohmann::json{{"model", s.model.to_json()}, {"gap_before", s.gap_before},
                          {"gap_after", s.gap_after}};
  });
  const Pipeline suppressed = with_model(original, model_from_json(doc.at("model")));
  r.gap_before = doc.at("gap_before").get<double>();
  r.gap_after = doc.at("gap_after").get<double>();
  r.original_accuracy = original.test_accuracy;
  r.suppressed_accuracy = suppressed.test_accuracy;
  r.agreement = prediction_agreement(*original.model, *suppressed.model, original.test_x());
  r.original_off = pipeline_global(stages, original, VfMethod::off_manifold, cfg.global_samples, cfg.seed);
  r.original_on = pipeline_global(stages, original, VfMethod::generative, cfg.global_samples, cfg.seed);
  r.suppressed_off = pipeline_global(stages, suppressed, VfMethod::off_manifold, cfg.global_samples, cfg.seed);
  r.suppressed_on = pipeline_global(stages, suppressed, VfMethod::generative, cfg.global_samples, cfg.seed);
  return r;
}

}  // namespace onshap
