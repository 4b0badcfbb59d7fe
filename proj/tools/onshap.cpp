// onshap: command-line front end for datasets, models, explanations and recipes.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "onshap/artifacts.hpp"
#include "onshap/experiments.hpp"
#include "onshap/generators.hpp"
#include "onshap/loaders.hpp"
#include "onshap/metrics.hpp"
#include "onshap/model_io.hpp"
#include "onshap/suppression.hpp"
#include "onshap/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  fs::path out_dir = "onshap-out";
  std::optional<fs::path> config;
  std::size_t threads = 0;

  json config_doc() const {
    if (!config) return json::object();
    if (!fs::exists(*config)) throw onshap::UsageError("config file not found: " + config->string());
    try {
      return onshap::read_json(*config);
    } catch (const json::exception& e) {
      throw onshap::UsageError("config file " + config->string() + " is not valid JSON: " + e.what());
    }
  }

  /// Flag wins over the config file, which wins over the default 0.
  std::uint64_t effective_seed(const json& cfg) const {
    if (seed_set) return seed;
    return cfg.value("seed", std::uint64_t{0});
  }

  fs::path output(const std::string& explicit_path, const std::string& default_name) const {
    if (!explicit_path.empty()) return explicit_path;
    fs::create_directories(out_dir);
    return out_dir / default_name;
  }
};

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  onshap::write_file_atomic(path, doc.dump(2) + "\n");
}

std::string preset_for(const std::string& dataset_name) {
  if (dataset_name == "drug" || dataset_name == "drug_like") return "drug";
  if (dataset_name == "census" || dataset_name == "census_like") return "census";
  if (dataset_name == "abalone") return "abalone";
  if (dataset_name == "binary_mnist") return "mnist";
  return "";
}

onshap::PipelineConfig pipeline_config(const onshap::Dataset& data, const json& cfg) {
  const onshap::PipelineConfig defaults = onshap::PipelineConfig::defaults(preset_for(data.name));
  return cfg.contains("pipeline") ? onshap::PipelineConfig::from_json(cfg.at("pipeline"), defaults)
                                  : defaults;
}

template <typename T>
T read_artifact(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw onshap::DataError(std::string(what) + " file not found: " + path.string());
  return T::from_json(onshap::read_json(path));
}

/// Pipeline over user-supplied artifacts, reusing the recipe value-function wiring.
onshap::Pipeline artifact_pipeline(const fs::path& data_path, const fs::path& model_path,
                                   const std::string& imputer_path, const std::string& surrogate_path,
                                   const json& cfg) {
  onshap::Pipeline p;
  p.data = onshap::load_dataset(data_path);
  p.cfg = pipeline_config(p.data, cfg);
  p.model = onshap::load_model(model_path);
  p.model_fingerprint = onshap::model_fingerprint(*p.model);
  if (p.model->n_features() != p.data.n_features()) {
    throw onshap::ShapeError("model expects " + std::to_string(p.model->n_features()) +
                             " features but the dataset has " + std::to_string(p.data.n_features()));
  }
  onshap::Matrix background = p.train_x();
  if (p.cfg.max_background && static_cast<std::size_t>(background.rows()) > p.cfg.max_background) {
    background.conservativeResize(static_cast<Eigen::Index>(p.cfg.max_background), Eigen::NoChange);
  }
  p.background = std::make_shared<const onshap::Matrix>(background);
  if (p.data.n_features() <= 64) {
    bool binary = true;
    for (const auto& c : p.data.schema) binary = binary && c.kind == onshap::FeatureKind::binary;
    if (binary) {
      p.empirical = std::make_shared<const onshap::EmpiricalConditionalContext>(p.model, p.train_x());
    }
  }
  if (!imputer_path.empty()) {
    p.imputer = std::make_shared<const onshap::Imputer>(read_artifact<onshap::Imputer>(imputer_path, "imputer"));
  }
  if (!surrogate_path.empty()) {
    auto s = std::make_shared<const onshap::Surrogate>(
        read_artifact<onshap::Surrogate>(surrogate_path, "surrogate"));
    if (s->target_fingerprint() != p.model_fingerprint) {
      throw onshap::DataError("surrogate " + surrogate_path + " was trained for a different model");
    }
    p.surrogate = s;
  }
  return p;
}

onshap::VfMethod parse_method(const std::string& name) {
  if (name == "off") return onshap::VfMethod::off_manifold;
  if (name == "empirical") return onshap::VfMethod::empirical_conditional;
  if (name == "unsupervised") return onshap::VfMethod::generative;
  if (name == "supervised") return onshap::VfMethod::surrogate;
  return onshap::vf_method_from_string(name);
}

void require_auxiliary(const onshap::Pipeline& p, onshap::VfMethod m) {
  if (m == onshap::VfMethod::generative && !p.imputer) {
    throw onshap::UsageError("method 'unsupervised' needs a trained imputer: pass --imputer <imputer.json>");
  }
  if (m == onshap::VfMethod::surrogate && !p.surrogate) {
    throw onshap::UsageError("method 'supervised' needs a trained surrogate: pass --surrogate <surrogate.json>");
  }
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw onshap::UsageError("bad feature index '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------- data

void add_data_commands(CLI::App& app, Globals& g) {
  auto* data = app.add_subcommand("data", "Generate or import datasets");
  data->require_subcommand(1);

  auto* gen = data->add_subcommand("gen", "Generate a synthetic dataset");
  static std::string kind, out;
  static std::size_t n_points = 0;
  static double sigma = 0.05;
  gen->add_option("kind", kind, "outlier | two-feature | drug-like | census-like")->required();
  gen->add_option("--n", n_points, "Number of rows (0 = kind default)");
  gen->add_option("--sigma", sigma, "Noise level for the outlier data");
  gen->add_option("--out", out, "Dataset manifest path");
  gen->callback([&g] {
    const json cfg = g.config_doc();
    const std::uint64_t seed = g.effective_seed(cfg);
    onshap::Dataset d;
    if (kind == "outlier") {
      onshap::OutlierGenConfig c;
      c.sigma = sigma;
      c.seed = seed;
      if (n_points) c.n_points = n_points;
      d = onshap::gen_outlier_data(c);
    } else if (kind == "two-feature") {
      const onshap::JointTable table = cfg.contains("table") ? onshap::JointTable::from_json(cfg.at("table"))
                                                             : onshap::JointTable::default_table();
      d = onshap::gen_two_feature_data(table, n_points ? n_points : 10000, seed);
    } else if (kind == "drug-like") {
      d = onshap::gen_drug_like(n_points ? n_points : 1885, seed);
    } else if (kind == "census-like") {
      d = onshap::gen_census_like(n_points ? n_points : 10000, seed);
    } else {
      throw onshap::UsageError("unknown generator '" + kind + "'");
    }
    const fs::path path = g.output(out, d.name + ".json");
    onshap::save_dataset(d, path);
    std::cout << path.string() << '\n';
  });

  auto* load = data->add_subcommand("load", "Import a delimited file or IDX images");
  static std::string preset, source, labels, spec_path, load_out;
  static std::size_t limit = 0;
  load->add_option("preset", preset, "drug | abalone | census | mnist | custom")->required();
  load->add_option("path", source, "Data file (IDX images for mnist)")->required();
  load->add_option("--labels", labels, "IDX label file (mnist)");
  load->add_option("--spec", spec_path, "Tabular schema JSON (custom)");
  load->add_option("--limit", limit, "Keep the first N images (mnist)");
  load->add_option("--out", load_out, "Dataset manifest path");
  load->callback([&g] {
    const std::uint64_t seed = g.effective_seed(g.config_doc());
    onshap::Dataset d;
    if (preset == "mnist") {
      std::optional<fs::path> label_file;
      if (!labels.empty()) label_file = labels;
      std::optional<std::size_t> cap;
      if (limit) cap = limit;
      d = onshap::load_binary_mnist(source, label_file, 0.5, cap, seed);
    } else if (preset == "custom") {
      if (spec_path.empty()) throw onshap::UsageError("custom datasets need --spec <schema.json>");
      d = onshap::load_tabular(source, onshap::TabularSpec::from_json(onshap::read_json(spec_path)), seed);
    } else {
      d = onshap::load_tabular(source, onshap::TabularSpec::preset(preset), seed);
    }
    const fs::path path = g.output(load_out, d.name + ".json");
    onshap::save_dataset(d, path);
    std::cout << path.string() << '\n';
  });
}

// ---------------------------------------------------------------- models

void add_model_commands(CLI::App& app, Globals& g) {
  auto* model = app.add_subcommand("model", "Fit and modify classifiers");
  model->require_subcommand(1);

  auto* fit = model->add_subcommand("fit", "Fit the explained classifier on the train split");
  static std::string data_path, kind, out;
  fit->add_option("--data", data_path, "Dataset manifest")->required();
  fit->add_option("--kind", kind, "mlp | random_forest | isolation_forest (default: dataset preset)");
  fit->add_option("--out", out, "Model JSON path");
  fit->callback([&g] {
    const json cfg = g.config_doc();
    const std::uint64_t seed = g.effective_seed(cfg);
    const onshap::Dataset d = onshap::load_dataset(data_path);
    onshap::PipelineConfig pc = pipeline_config(d, cfg);
    if (!kind.empty()) pc.model_kind = kind;
    const onshap::Matrix x = d.rows(d.split.train);
    std::shared_ptr<onshap::Model> m;
    if (pc.model_kind == "isolation_forest") {
      onshap::IsolationForestConfig ic{100, 256, onshap::derive_seed(seed, 0xf0)};
      if (cfg.contains("isolation_forest")) ic = onshap::isolation_config_from_json(cfg.at("isolation_forest"), ic);
      auto forest = std::make_shared<onshap::IsolationForest>(onshap::fit_isolation_forest(d.features, ic));
      forest->calibrate_offset(d.features, cfg.value("contamination", 0.01));
      m = forest;
    } else {
      if (!d.labeled()) throw onshap::DataError("supervised models need a labeled dataset");
      const std::vector<int> y = d.labels_of(d.split.train);
      if (pc.model_kind == "random_forest") {
        m = std::make_shared<onshap::RandomForest>(
            onshap::fit_random_forest(x, y, d.n_classes, pc.forest, onshap::derive_seed(seed, 0x11)));
      } else if (pc.model_kind == "mlp") {
        onshap::MlpConfig mc = pc.mlp;
        mc.train.seed = onshap::derive_seed(seed, 0x11);
        m = std::make_shared<onshap::MlpClassifier>(
            onshap::fit_mlp(x, y, d.n_classes, d.rows(d.split.validation), d.labels_of(d.split.validation), mc)
                .model);
      } else {
        throw onshap::UsageError("unknown model kind '" + pc.model_kind + "'");
      }
      std::cerr << "test accuracy "
                << onshap::accuracy(*m, d.rows(d.split.test), d.labels_of(d.split.test)) << '\n';
    }
    const fs::path path = g.output(out, "model.json");
    onshap::save_model(*m, path);
    std::cout << path.string() << '\n';
  });

  auto* sup = model->add_subcommand("finetune-suppress", "Fine-tune an MLP to hide a feature");
  static std::string s_model, s_data, feature, s_out;
  static double alpha = 3.0;
  static std::size_t epochs = 200;
  sup->add_option("--model", s_model, "MLP model JSON")->required();
  sup->add_option("--data", s_data, "Dataset manifest")->required();
  sup->add_option("--feature", feature, "Feature name or index")->required();
  sup->add_option("--alpha", alpha, "Weight of the intervention penalty");
  sup->add_option("--epochs", epochs, "Fine-tuning epochs");
  sup->add_option("--out", s_out, "Output model JSON path");
  sup->callback([&g] {
    const json cfg = g.config_doc();
    const std::uint64_t seed = g.effective_seed(cfg);
    const onshap::Dataset d = onshap::load_dataset(s_data);
    const onshap::ModelPtr base = onshap::load_model(s_model);
    const auto* mlp = dynamic_cast<const onshap::MlpClassifier*>(base.get());
    if (!mlp) throw onshap::UsageError("suppression fine-tuning needs an mlp model");
    const auto names = d.feature_names();
    onshap::SuppressionConfig sc;
    const auto it = std::find(names.begin(), names.end(), feature);
    if (it != names.end()) {
      sc.feature = static_cast<std::size_t>(it - names.begin());
    } else {
      sc.feature = parse_index_list(feature).at(0);
    }
    sc.alpha = alpha;
    sc.train = pipeline_config(d, cfg).mlp.train;
    sc.train.max_epochs = epochs;
    sc.train.patience.reset();
    sc.train.seed = onshap::derive_seed(seed, 0x5f);
    const onshap::SuppressionResult r = onshap::suppress_feature_finetune(
        *mlp, d.rows(d.split.train), d.labels_of(d.split.train), d.rows(d.split.validation),
        d.labels_of(d.split.validation), sc);
    std::cerr << "intervention gap " << r.gap_before << " -> " << r.gap_after << ", agreement "
              << onshap::prediction_agreement(*mlp, r.model, d.rows(d.split.test)) << '\n';
    const fs::path path = g.output(s_out, "suppressed_model.json");
    onshap::save_model(r.model, path);
    std::cout << path.string() << '\n';
  });
}

// ---------------------------------------------------------------- auxiliaries

void add_auxiliary_commands(CLI::App& app, Globals& g) {
  auto* imp = app.add_subcommand("imputer", "Conditional generative imputer");
  imp->require_subcommand(1);
  auto* itrain = imp->add_subcommand("train", "Train the imputer on the train split");
  static std::string i_data, i_out;
  itrain->add_option("--data", i_data, "Dataset manifest")->required();
  itrain->add_option("--out", i_out, "Imputer JSON path");
  itrain->callback([&g] {
    const json cfg = g.config_doc();
    const onshap::Dataset d = onshap::load_dataset(i_data);
    onshap::ImputerHyper h = pipeline_config(d, cfg).imputer;
    h.train.seed = onshap::derive_seed(g.effective_seed(cfg), 0x13);
    const onshap::ImputerFit fit =
        onshap::train_imputer(d.rows(d.split.train), d.rows(d.split.validation), d.schema, h);
    const fs::path path = g.output(i_out, "imputer.json");
    write_json(path, fit.imputer->to_json());
    std::cout << path.string() << '\n';
  });

  auto* sur = app.add_subcommand("surrogate", "Masked-input surrogate of a model");
  sur->require_subcommand(1);
  auto* strain = sur->add_subcommand("train", "Train the surrogate on the train split");
  static std::string s_data, s_model, s_out;
  strain->add_option("--data", s_data, "Dataset manifest")->required();
  strain->add_option("--model", s_model, "Model JSON")->required();
  strain->add_option("--out", s_out, "Surrogate JSON path");
  strain->callback([&g] {
    const json cfg = g.config_doc();
    const onshap::Dataset d = onshap::load_dataset(s_data);
    const onshap::ModelPtr m = onshap::load_model(s_model);
    onshap::SurrogateConfig sc = pipeline_config(d, cfg).surrogate;
    sc.train.seed = onshap::derive_seed(g.effective_seed(cfg), 0x12);
    const onshap::SurrogateFit fit = onshap::train_surrogate(
        *m, d.rows(d.split.train), d.rows(d.split.validation), d.schema, onshap::model_fingerprint(*m), sc);
    std::cerr << "validation mse " << fit.validation_mse << '\n';
    const fs::path path = g.output(s_out, "surrogate.json");
    write_json(path, fit.surrogate.to_json());
    std::cout << path.string() << '\n';
  });
}

// ---------------------------------------------------------------- explain

void add_explain_command(CLI::App& app, Globals& g) {
  auto* ex = app.add_subcommand("explain", "Shapley explanation of one point or of the whole model");
  static std::string model, data, method = "off", imputer, surrogate, out, svg;
  static std::optional<std::size_t> point;
  static std::optional<int> target;
  static bool global = false, antithetic = false;
  static std::size_t samples = 1000, n_inner = 1;
  ex->add_option("--model", model, "Model JSON")->required();
  ex->add_option("--data", data, "Dataset manifest")->required();
  ex->add_option("--point", point, "Row index to explain");
  ex->add_flag("--global", global, "Global values over the test split");
  ex->add_option("--method", method, "off | empirical | unsupervised | supervised");
  ex->add_option("--class", target, "Class to explain (default: predicted)");
  ex->add_option("--samples", samples, "Permutations (local) or sampled points (global)");
  ex->add_option("--n-inner", n_inner, "Inner draws per coalition for sampled value functions");
  ex->add_flag("--antithetic", antithetic, "Pair every permutation with its reverse");
  ex->add_option("--imputer", imputer, "Imputer JSON (unsupervised)");
  ex->add_option("--surrogate", surrogate, "Surrogate JSON (supervised)");
  ex->add_option("--out", out, "Attribution JSON path");
  ex->add_option("--svg", svg, "Also write a bar chart with standard-error bars");
  ex->callback([&g] {
    if (global == point.has_value()) throw onshap::UsageError("pass exactly one of --point and --global");
    const json cfg = g.config_doc();
    const std::uint64_t seed = g.effective_seed(cfg);
    const onshap::VfMethod m = parse_method(method);
    const onshap::Pipeline p = artifact_pipeline(data, model, imputer, surrogate, cfg);
    require_auxiliary(p, m);
    onshap::Attribution a;
    if (global) {
      if (!p.data.labeled()) throw onshap::DataError("global values need a labeled dataset");
      a = onshap::shapley_global(p.test_x(), p.test_y(), p.factory(m, n_inner), samples, seed);
    } else {
      if (*point >= p.data.n_rows()) {
        throw onshap::UsageError("--point " + std::to_string(*point) + " is out of range (dataset has " +
                                 std::to_string(p.data.n_rows()) + " rows)");
      }
      const onshap::Vector x = p.data.features.row(static_cast<Eigen::Index>(*point)).transpose();
      const onshap::Vector probs = p.model->predict_row(x);
      const int y = target ? *target
                           : static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      if (y < 0 || static_cast<std::size_t>(y) >= p.model->n_outputs()) {
        throw onshap::UsageError("--class is out of range for this model");
      }
      onshap::McOptions mc;
      mc.n_samples = samples;
      mc.seed = seed;
      mc.antithetic = antithetic;
      a = onshap::shapley_mc(*p.factory(m, n_inner)(x, y), mc);
      a.point_index = *point;
      a.target_class = y;
    }
    a.feature_names = p.data.feature_names();
    const fs::path path = g.output(out, "attribution.json");
    write_json(path, a.to_json());
    if (!svg.empty()) {
      onshap::write_file_atomic(svg, onshap::bar_chart_svg("Shapley values (" + method + ")", a.feature_names,
                                                           {{method, a.values, a.std_errors}}));
    }
    std::cout << path.string() << '\n';
  });
}

// ---------------------------------------------------------------- metrics

void add_metrics_commands(CLI::App& app, Globals& g) {
  auto* metrics = app.add_subcommand("metrics", "Evaluation metrics");
  metrics->require_subcommand(1);

  auto* mse = metrics->add_subcommand("mse", "Value-function MSE against the model on the test split");
  static std::string model, data, method = "off", imputer, surrogate, out;
  static std::size_t samples = 10000, n_inner = 16;
  mse->add_option("--model", model, "Model JSON")->required();
  mse->add_option("--data", data, "Dataset manifest")->required();
  mse->add_option("--method", method, "off | empirical | unsupervised | supervised");
  mse->add_option("--samples", samples, "Monte Carlo samples");
  mse->add_option("--n-inner", n_inner, "Inner draws per coalition");
  mse->add_option("--imputer", imputer, "Imputer JSON (unsupervised)");
  mse->add_option("--surrogate", surrogate, "Surrogate JSON (supervised)");
  mse->add_option("--out", out, "MseReport JSON path");
  mse->callback([&g] {
    const json cfg = g.config_doc();
    const onshap::VfMethod m = parse_method(method);
    const onshap::Pipeline p = artifact_pipeline(data, model, imputer, surrogate, cfg);
    require_auxiliary(p, m);
    onshap::MseReport r =
        onshap::value_function_mse(*p.model, p.factory(m, n_inner), p.test_x(), samples, g.effective_seed(cfg));
    r.method_id = method;
    r.dataset_id = p.data.name;
    const fs::path path = g.output(out, "mse.json");
    write_json(path, r.to_json());
    std::cout << r.mse << " +- " << r.std_error << '\n';
  });

  auto* err = metrics->add_subcommand("error-rate", "Share of explanations whose top features miss the truth");
  static std::vector<std::string> attributions;
  static std::string truth;
  err->add_option("attributions", attributions, "Attribution JSON files")->required();
  err->add_option("--ground-truth", truth, "Comma-separated indices of the responsible features")->required();
  err->callback([] {
    std::vector<onshap::Attribution> as;
    for (const auto& f : attributions) as.push_back(read_artifact<onshap::Attribution>(f, "attribution"));
    std::cout << onshap::explanation_error_rate(as, parse_index_list(truth)) << '\n';
  });

  auto* agree = metrics->add_subcommand("agreement", "Agreement between two attributions or two models");
  static std::vector<std::string> pair;
  static std::string agree_data;
  agree->add_option("files", pair, "Two attribution JSON files, or two model JSON files with --data")
      ->required()
      ->expected(2);
  agree->add_option("--data", agree_data, "Dataset manifest (compares model predictions on the test split)");
  agree->callback([] {
    if (!agree_data.empty()) {
      const onshap::Dataset d = onshap::load_dataset(agree_data);
      const onshap::ModelPtr a = onshap::load_model(pair[0]), b = onshap::load_model(pair[1]);
      std::cout << json{{"prediction_agreement", onshap::prediction_agreement(*a, *b, d.rows(d.split.test))}}.dump()
                << '\n';
      return;
    }
    const auto a = read_artifact<onshap::Attribution>(pair[0], "attribution");
    const auto b = read_artifact<onshap::Attribution>(pair[1], "attribution");
    std::cout << onshap::attribution_agreement(a, b).to_json().dump() << '\n';
  });
}

// ---------------------------------------------------------------- recipes

void add_experiment_commands(CLI::App& app, Globals& g) {
  auto* exp = app.add_subcommand("experiment", "End-to-end experiment recipes");
  exp->require_subcommand(1);
  auto* run = exp->add_subcommand("run", "Run a recipe into --out-dir");
  static std::string name;
  static bool no_cache = false;
  std::string names;
  for (const auto& n : onshap::recipe_names()) names += (names.empty() ? "" : ", ") + n;
  run->add_option("name", name, "Recipe: " + names)->required();
  run->add_flag("--no-cache", no_cache, "Recompute every stage");
  run->callback([&g] {
    const json cfg = g.config_doc();
    const json manifest = onshap::run_recipe(name, g.out_dir, g.effective_seed(cfg), cfg, !no_cache);
    std::cout << (g.out_dir / "manifest.json").string() << '\n';
    std::cerr << manifest.at("stages").size() << " stages, " << manifest.at("training_stages_computed")
              << " trained\n";
  });

  auto* report = app.add_subcommand("report", "Tables and figures from a completed recipe");
  static std::string which, run_dir;
  report->add_option("which", which, "table1 | fig3 | fig4")->required();
  report->add_option("--run-dir", run_dir, "Directory of the completed recipe")->required();
  report->callback([&g] {
    for (const auto& p : onshap::write_report(which, run_dir, g.out_dir)) std::cout << p.string() << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"onshap: on-manifold and off-manifold Shapley explanations"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->each([&g](const std::string&) { g.seed_set = true; });
  app.add_option("--out-dir", g.out_dir, "Directory for outputs");
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");
  app.parse_complete_callback([&g] {
    if (g.threads) onshap::set_default_threads(g.threads);
  });

  add_data_commands(app, g);
  add_model_commands(app, g);
  add_auxiliary_commands(app, g);
  add_explain_command(app, g);
  add_metrics_commands(app, g);
  add_experiment_commands(app, g);

  onshap::set_warning_sink([](std::string_view m) { std::cerr << "warning: " << m << '\n'; });
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const onshap::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const onshap::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const onshap::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
