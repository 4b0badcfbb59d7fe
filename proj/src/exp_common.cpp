#include <algorithm>
#include <cmath>
#include <limits>

#include "onshap/experiments.hpp"
#include "onshap/loaders.hpp"
#include "onshap/model_io.hpp"

namespace onshap {
namespace {

std::optional<std::filesystem::path> optional_path(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return std::filesystem::path(doc.at(key).get<std::string>());
}

nlohmann::json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
}

Dataset keep_first_rows(Dataset data, std::size_t limit, std::uint64_t seed) {
  if (limit == 0 || limit >= data.n_rows()) return data;
  data.features.conservativeResize(static_cast<Eigen::Index>(limit), Eigen::NoChange);
  if (data.labels) data.labels->resize(limit);
  data.split = make_split(limit, seed, data.split_fractions);
  data.provenance["row_limit"] = limit;
  return data;
}

std::string max_features_name(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::all:
      return "all";
    case MaxFeatures::sqrt:
      return "sqrt";
    case MaxFeatures::log2:
      return "log2";
  }
  return "all";
}

MaxFeatures max_features_from(const std::string& name) {
  if (name == "all") return MaxFeatures::all;
  if (name == "sqrt") return MaxFeatures::sqrt;
  if (name == "log2") return MaxFeatures::log2;
  throw UsageError("unknown max_features '" + name + "'");
}

// Neighbours of `value` within a sorted grid (the value itself included).
template <class T>
std::vector<T> neighbours(const std::vector<T>& grid, T value) {
  const auto it = std::find(grid.begin(), grid.end(), value);
  if (it == grid.end()) return {value};
  std::vector<T> out;
  if (it != grid.begin()) out.push_back(*(it - 1));
  out.push_back(*it);
  if (it + 1 != grid.end()) out.push_back(*(it + 1));
  return out;
}

const std::vector<std::size_t> kHiddenGrid = {128, 256, 512};
const std::vector<double> kLrGrid = {1e-4, 1e-3};
const std::vector<std::size_t> kLatentGrid = {2, 4, 8, 16};
const std::vector<std::size_t> kModesGrid = {1, 2};
const std::vector<double> kBetaGrid = {0.05, 0.1, 0.5, 1.0};

std::uint64_t method_stream(VfMethod m) { return 0x600 + static_cast<std::uint64_t>(m); }

}  // namespace

nlohmann::json DataSource::to_json() const {
  return {{"preset", preset},
          {"path", path_json(path)},
          {"labels_path", path_json(labels_path)},
          {"allow_standin", allow_standin},
          {"standin_rows", standin_rows},
          {"limit", limit}};
}

DataSource DataSource::from_json(const nlohmann::json& doc) {
  DataSource s;
  s.preset = doc.at("preset").get<std::string>();
  s.path = optional_path(doc, "path");
  s.labels_path = optional_path(doc, "labels_path");
  s.allow_standin = doc.value("allow_standin", false);
  s.standin_rows = doc.value("standin_rows", std::size_t{0});
  s.limit = doc.value("limit", std::size_t{0});
  return s;
}

Dataset acquire_dataset(const DataSource& source, std::uint64_t seed) {
  const std::string& p = source.preset;
  if (p == "mnist") {
    if (!source.path) {
      throw DataError(
          "binary MNIST needs IDX files: pass the image file as the data path and the label file "
          "as the labels path (train-images-idx3-ubyte / train-labels-idx1-ubyte from "
          "http://yann.lecun.com/exdb/mnist/)");
    }
    std::optional<std::size_t> limit;
    if (source.limit) limit = source.limit;
    Dataset d = load_binary_mnist(*source.path, source.labels_path, 0.5, limit, seed);
    d.provenance["origin"] = "file";
    return d;
  }
  if (p != "drug" && p != "abalone" && p != "census") {
    throw UsageError("unknown dataset '" + p + "' (expected drug, abalone, census or mnist)");
  }
  if (source.path) {
    Dataset d = load_tabular(*source.path, TabularSpec::preset(p), seed);
    d.provenance["origin"] = "file";
    return keep_first_rows(std::move(d), source.limit, seed);
  }
  if (source.allow_standin && p != "abalone") {
    Dataset d = p == "drug" ? gen_drug_like(source.standin_rows ? source.standin_rows : 1885, seed)
                            : gen_census_like(source.standin_rows ? source.standin_rows : 10000, seed);
    d.provenance["origin"] = "stand-in";
    return keep_first_rows(std::move(d), source.limit, seed);
  }
  const TabularSpec spec = TabularSpec::preset(p);
  throw DataError("no data file given for '" + p + "'; download it from " + spec.source_hint +
                  " and pass its path" +
                  (p == "abalone" ? std::string() : std::string(" (or allow the generated stand-in)")));
}

nlohmann::json to_json(const MlpConfig& cfg) {
  return {{"hidden", cfg.hidden}, {"train", cfg.train.to_json()}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& doc, const MlpConfig& defaults) {
  MlpConfig c = defaults;
  c.hidden = doc.value("hidden", c.hidden);
  if (doc.contains("train")) c.train = TrainConfig::from_json(doc.at("train"), c.train);
  return c;
}

nlohmann::json to_json(const ForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees},
          {"bootstrap", cfg.bootstrap},
          {"max_depth", cfg.tree.max_depth ? nlohmann::json(*cfg.tree.max_depth) : nlohmann::json(nullptr)},
          {"min_samples_split", cfg.tree.min_samples_split},
          {"max_features", max_features_name(cfg.tree.max_features)}};
}

ForestConfig forest_config_from_json(const nlohmann::json& doc, const ForestConfig& defaults) {
  ForestConfig c = defaults;
  c.n_trees = doc.value("n_trees", c.n_trees);
  c.bootstrap = doc.value("bootstrap", c.bootstrap);
  if (doc.contains("max_depth")) {
    c.tree.max_depth = doc.at("max_depth").is_null()
                           ? std::nullopt
                           : std::optional<std::size_t>(doc.at("max_depth").get<std::size_t>());
  }
  c.tree.min_samples_split = doc.value("min_samples_split", c.tree.min_samples_split);
  if (doc.contains("max_features")) c.tree.max_features = max_features_from(doc.at("max_features"));
  return c;
}

nlohmann::json to_json(const SurrogateConfig& cfg) {
  return {{"hidden", cfg.hidden}, {"train", cfg.train.to_json()}};
}

SurrogateConfig surrogate_config_from_json(const nlohmann::json& doc, const SurrogateConfig& defaults) {
  SurrogateConfig c = defaults;
  c.hidden = doc.value("hidden", c.hidden);
  if (doc.contains("train")) c.train = TrainConfig::from_json(doc.at("train"), c.train);
  return c;
}

nlohmann::json to_json(const IsolationForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees}, {"subsample_size", cfg.subsample_size}, {"seed", cfg.seed}};
}

IsolationForestConfig isolation_config_from_json(const nlohmann::json& doc,
                                                 const IsolationForestConfig& defaults) {
  IsolationForestConfig c = defaults;
  c.n_trees = doc.value("n_trees", c.n_trees);
  c.subsample_size = doc.value("subsample_size", c.subsample_size);
  c.seed = doc.value("seed", c.seed);
  return c;
}

PipelineConfig PipelineConfig::defaults(const std::string& preset) {
  PipelineConfig c;
  // sklearn-style MLP: adam 1e-3, batch 200, early stopping after 10 flat epochs.
  c.mlp.train.learning_rate = 1e-3;
  c.mlp.train.batch_size = 200;
  c.mlp.train.max_epochs = 200;
  c.mlp.train.patience = 10;
  c.surrogate.train.batch_size = 256;
  c.imputer.train.batch_size = 256;
  if (preset == "drug") {
    c.model_kind = "random_forest";
    c.forest.n_trees = 100;
    c.forest.tree.max_features = MaxFeatures::all;
    c.surrogate.hidden = 512;
    c.surrogate.train.learning_rate = 1e-3;
    c.surrogate.train.max_epochs = 1000;
    c.surrogate.train.patience = 100;
    c.imputer.hidden = 128;
    c.imputer.latent_dim = 4;
    c.imputer.n_modes = 1;
    c.imputer.beta = 0.5;
    c.imputer.train.learning_rate = 1e-3;
    c.imputer.train.max_epochs = 2000;
    c.imputer.train.patience = 100;
  } else if (preset == "abalone") {
    c.mlp.hidden = {100};
    c.surrogate.hidden = 512;
    c.surrogate.train.learning_rate = 1e-3;
    c.surrogate.train.max_epochs = 500;
    c.surrogate.train.patience = 50;
    c.imputer.hidden = 256;
    c.imputer.latent_dim = 2;
    c.imputer.n_modes = 1;
    c.imputer.beta = 0.05;
    c.imputer.train.learning_rate = 1e-3;
    c.imputer.train.max_epochs = 1000;
    c.imputer.train.patience = 100;
  } else if (preset == "census") {
    c.mlp.hidden = {50};
    c.surrogate.hidden = 512;
    c.surrogate.train.learning_rate = 1e-3;
    c.surrogate.train.max_epochs = 200;
    c.surrogate.train.patience = 30;
    c.imputer.hidden = 128;
    c.imputer.latent_dim = 8;
    c.imputer.n_modes = 1;
    c.imputer.beta = 1.0;
    c.imputer.train.learning_rate = 1e-3;
    c.imputer.train.max_epochs = 500;
    c.imputer.train.patience = 50;
    c.max_background = 2000;
  } else if (preset == "mnist") {
    c.mlp.hidden = {512};
    c.surrogate.hidden = 512;
    c.surrogate.train.learning_rate = 1e-4;
    c.surrogate.train.max_epochs = 300;
    c.surrogate.train.patience = 30;
    c.imputer.hidden = 512;
    c.imputer.latent_dim = 16;
    c.imputer.n_modes = 1;
    c.imputer.beta = 1.0;
    c.imputer.train.learning_rate = 1e-4;
    c.imputer.train.max_epochs = 300;
    c.imputer.train.patience = 30;
    c.max_background = 2000;
  } else if (!preset.empty()) {
    throw UsageError("no pipeline defaults for '" + preset + "'");
  }
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"model_kind", model_kind},
          {"mlp", onshap::to_json(mlp)},
          {"forest", onshap::to_json(forest)},
          {"surrogate", onshap::to_json(surrogate)},
          {"imputer", imputer.to_json()},
          {"grid_search", grid_search},
          {"n_inner_global", n_inner_global},
          {"n_inner_mse", n_inner_mse},
          {"max_background", max_background}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc, const PipelineConfig& defaults) {
  PipelineConfig c = defaults;
  c.model_kind = doc.value("model_kind", c.model_kind);
  if (c.model_kind != "mlp" && c.model_kind != "random_forest") {
    throw UsageError("model_kind must be mlp or random_forest");
  }
  if (doc.contains("mlp")) c.mlp = mlp_config_from_json(doc.at("mlp"), c.mlp);
  if (doc.contains("forest")) c.forest = forest_config_from_json(doc.at("forest"), c.forest);
  if (doc.contains("surrogate")) c.surrogate = surrogate_config_from_json(doc.at("surrogate"), c.surrogate);
  if (doc.contains("imputer")) c.imputer = ImputerHyper::from_json(doc.at("imputer"), c.imputer);
  c.grid_search = doc.value("grid_search", c.grid_search);
  c.n_inner_global = doc.value("n_inner_global", c.n_inner_global);
  c.n_inner_mse = doc.value("n_inner_mse", c.n_inner_mse);
  c.max_background = doc.value("max_background", c.max_background);
  return c;
}

Matrix Pipeline::train_x() const { return data.rows(data.split.train); }
Matrix Pipeline::validation_x() const { return data.rows(data.split.validation); }
Matrix Pipeline::test_x() const { return data.rows(data.split.test); }
std::vector<int> Pipeline::test_y() const { return data.labels_of(data.split.test); }

bool Pipeline::supports(VfMethod method) const {
  switch (method) {
    case VfMethod::off_manifold:
      return true;
    case VfMethod::empirical_conditional:
      return empirical != nullptr;
    case VfMethod::generative:
      return imputer != nullptr;
    case VfMethod::surrogate:
      return surrogate != nullptr;
    case VfMethod::retraining:
      return false;
  }
  return false;
}

VfFactory Pipeline::factory(VfMethod method, std::size_t n_inner) const {
  switch (method) {
    case VfMethod::off_manifold:
      return off_manifold_factory(model, background, n_inner);
    case VfMethod::empirical_conditional:
      if (!empirical) throw UsageError("empirical conditioning needs all-binary features");
      return empirical_factory(empirical);
    case VfMethod::generative:
      if (!imputer) throw UsageError("the generative method needs a trained imputer (run imputer train)");
      return sampler_factory(model, imputer, n_inner);
    case VfMethod::surrogate:
      if (!surrogate) throw UsageError("the surrogate method needs a trained surrogate (run surrogate train)");
      return surrogate_factory(surrogate);
    case VfMethod::retraining:
      break;
  }
  throw UsageError("the retraining game is not a per-point value function");
}

namespace {

bool all_binary(const Dataset& d) {
  return d.n_features() <= 64 &&
         std::all_of(d.schema.begin(), d.schema.end(),
                     [](const ColumnSchema& c) { return c.kind == FeatureKind::binary; });
}

ModelPtr fit_pipeline_model(const Pipeline& p, std::uint64_t seed) {
  const Matrix x = p.train_x();
  const std::vector<int> y = p.data.labels_of(p.data.split.train);
  if (p.cfg.model_kind == "random_forest") {
    return std::make_shared<RandomForest>(fit_random_forest(x, y, p.data.n_classes, p.cfg.forest, seed));
  }
  MlpConfig mlp = p.cfg.mlp;
  mlp.train.seed = seed;
  const Matrix vx = p.validation_x();
  const std::vector<int> vy = p.data.labels_of(p.data.split.validation);
  return std::make_shared<MlpClassifier>(fit_mlp(x, y, p.data.n_classes, vx, vy, mlp).model);
}

// Validation MSE of a trained imputer, used to rank grid points.
double imputer_validation_mse(const Pipeline& p, const std::shared_ptr<const Imputer>& imputer,
                              std::uint64_t seed) {
  const Matrix vx = p.validation_x();
  return value_function_mse(*p.model, sampler_factory(p.model, imputer, p.cfg.n_inner_mse), vx,
                            2000, seed)
      .mse;
}

}  // namespace

Pipeline build_pipeline(StageRunner& stages, Dataset data, const PipelineConfig& cfg,
                        std::uint64_t seed, bool with_surrogate, bool with_imputer,
                        std::uint64_t replicate) {
  if (!data.labeled()) throw DataError("explanation recipes need a labeled dataset");
  Pipeline p;
  p.data = std::move(data);
  p.cfg = cfg;
  const std::string data_fp = p.data.fingerprint();

  const nlohmann::json model_key = {{"data", data_fp},
                                    {"kind", cfg.model_kind},
                                    {"config", cfg.model_kind == "mlp" ? to_json(cfg.mlp) : to_json(cfg.forest)},
                                    {"seed", seed}};
  const nlohmann::json model_doc = stages.run("model", model_key, true, [&] {
    const ModelPtr m = fit_pipeline_model(p, derive_seed(seed, 0x11));
    return m->to_json();
  });
  p.model = model_from_json(model_doc);
  p.model_fingerprint = model_fingerprint(*p.model);
  const Matrix test = p.test_x();
  const std::vector<int> test_y = p.test_y();
  p.test_accuracy = accuracy(*p.model, test, test_y);

  Matrix background = p.train_x();
  if (cfg.max_background && static_cast<std::size_t>(background.rows()) > cfg.max_background) {
    background.conservativeResize(static_cast<Eigen::Index>(cfg.max_background), Eigen::NoChange);
  }
  p.background = std::make_shared<const Matrix>(background);
  if (all_binary(p.data)) {
    p.empirical = std::make_shared<EmpiricalConditionalContext>(p.model, p.train_x());
  }

  if (with_surrogate) {
    SurrogateConfig sc = cfg.surrogate;
    sc.train.seed = derive_seed(seed, 0x12, replicate);
    const nlohmann::json key = {{"model", p.model_fingerprint},
                                {"data", data_fp},
                                {"config", to_json(sc)},
                                {"grid", cfg.grid_search}};
    const nlohmann::json doc = stages.run("surrogate", key, true, [&] {
      const Matrix tx = p.train_x(), vx = p.validation_x();
      std::vector<SurrogateGridPoint> trace;
      SurrogateFit fit = cfg.grid_search
                             ? select_surrogate(*p.model, tx, vx, p.data.schema, p.model_fingerprint,
                                                neighbours(kHiddenGrid, sc.hidden), kLrGrid, sc, &trace)
                             : train_surrogate(*p.model, tx, vx, p.data.schema, p.model_fingerprint, sc);
      nlohmann::json grid = nlohmann::json::array();
      for (const auto& g : trace) {
        grid.push_back({{"hidden", g.hidden}, {"learning_rate", g.learning_rate},
                        {"validation_mse", g.validation_mse}});
      }
      return nlohmann::json{{"surrogate", fit.surrogate.to_json()},
                            {"validation_mse", fit.validation_mse},
                            {"epochs", fit.history.epochs.size()},
                            {"grid", grid}};
    });
    p.surrogate = std::make_shared<const Surrogate>(Surrogate::from_json(doc.at("surrogate")));
  }

  if (with_imputer) {
    ImputerHyper hyper = cfg.imputer;
    hyper.train.seed = derive_seed(seed, 0x13, replicate);
    nlohmann::json key = {{"data", data_fp}, {"hyper", hyper.to_json()}, {"grid", cfg.grid_search}};
    if (cfg.grid_search) key["model"] = p.model_fingerprint;  // selection uses the model's MSE
    const nlohmann::json doc = stages.run("imputer", key, true, [&] {
      const Matrix tx = p.train_x(), vx = p.validation_x();
      std::vector<ImputerHyper> candidates = {hyper};
      if (cfg.grid_search) {
        auto vary = [&](auto setter, const auto& grid, auto value) {
          for (auto v : neighbours(grid, value)) {
            if (v == value) continue;
            ImputerHyper h = hyper;
            setter(h, v);
            candidates.push_back(h);
          }
        };
        vary([](ImputerHyper& h, std::size_t v) { h.hidden = v; }, kHiddenGrid, hyper.hidden);
        vary([](ImputerHyper& h, double v) { h.train.learning_rate = v; }, kLrGrid, hyper.train.learning_rate);
        vary([](ImputerHyper& h, std::size_t v) { h.latent_dim = v; }, kLatentGrid, hyper.latent_dim);
        vary([](ImputerHyper& h, std::size_t v) { h.n_modes = v; }, kModesGrid, hyper.n_modes);
        vary([](ImputerHyper& h, double v) { h.beta = v; }, kBetaGrid, hyper.beta);
      }
      nlohmann::json grid = nlohmann::json::array();
      std::shared_ptr<Imputer> best;
      double best_mse = std::numeric_limits<double>::infinity();
      for (const auto& h : candidates) {
        ImputerFit fit = train_imputer(tx, vx, p.data.schema, h);
        const double mse = candidates.size() > 1
                               ? imputer_validation_mse(p, fit.imputer, derive_seed(seed, 0x14))
                               : 0.0;
        grid.push_back({{"hyper", h.to_json()}, {"validation_mse", mse},
                        {"epochs", fit.history.epochs.size()}});
        if (!best || mse < best_mse) {
          best = fit.imputer;
          best_mse = mse;
        }
      }
      return nlohmann::json{{"imputer", best->to_json()}, {"grid", grid}};
    });
    p.imputer = std::make_shared<const Imputer>(Imputer::from_json(doc.at("imputer")));
  }
  return p;
}

Pipeline with_model(const Pipeline& p, ModelPtr model) {
  Pipeline out = p;
  out.model = std::move(model);
  out.model_fingerprint = model_fingerprint(*out.model);
  out.test_accuracy = accuracy(*out.model, p.test_x(), p.test_y());
  out.surrogate = nullptr;  // trained against the previous model
  if (p.empirical) {
    out.empirical = std::make_shared<EmpiricalConditionalContext>(out.model, p.empirical->background());
  }
  return out;
}

Attribution pipeline_global(StageRunner& stages, const Pipeline& p, VfMethod method,
                            std::size_t n_samples, std::uint64_t seed, SizeProfile* profile) {
  const nlohmann::json key = {{"model", p.model_fingerprint},
                              {"data", p.data.fingerprint()},
                              {"method", to_string(method)},
                              {"surrogate", p.surrogate && method == VfMethod::surrogate
                                                ? sha256_hex(p.surrogate->to_json().dump())
                                                : std::string()},
                              {"imputer", p.imputer && method == VfMethod::generative
                                              ? sha256_hex(p.imputer->to_json().dump())
                                              : std::string()},
                              {"n_inner", p.cfg.n_inner_global},
                              {"max_background", p.cfg.max_background},
                              {"samples", n_samples},
                              {"seed", seed},
                              {"profile", profile != nullptr}};
  const nlohmann::json doc = stages.run("global:" + to_string(method), key, false, [&] {
    SizeProfile local(p.data.n_features());
    const Matrix test = p.test_x();
    const std::vector<int> y = p.test_y();
    Attribution a = shapley_global(test, y, p.factory(method, p.cfg.n_inner_global), n_samples,
                                   derive_seed(seed, method_stream(method)),
                                   profile ? &local : nullptr);
    a.feature_names = p.data.feature_names();
    nlohmann::json out = {{"attribution", a.to_json()}};
    if (profile) out["profile"] = local.to_json();
    return out;
  });
  if (profile) *profile = SizeProfile::from_json(doc.at("profile"));
  return Attribution::from_json(doc.at("attribution"));
}

}  // namespace onshap
