#include <bit>
#include <sstream>

#include "onshap/experiments.hpp"
#include "onshap/model_io.hpp"
#include "onshap/outlier_conditional.hpp"

namespace onshap {
namespace {

OutlierGenConfig gen_config(const OutlierStudyConfig& cfg, double sigma) {
  OutlierGenConfig g;
  g.n_points = cfg.n_points;
  g.sigma = sigma;
  g.outlier_fraction = cfg.outlier_fraction;
  g.seed = derive_seed(cfg.seed, std::bit_cast<std::uint64_t>(sigma));
  return g;
}

// Forest fitted on the data with its offset calibrated to the outlier fraction.
std::shared_ptr<IsolationForest> fitted_forest(StageRunner& stages, const OutlierStudyConfig& cfg,
                                               const Dataset& data, const OutlierGenConfig& g) {
  IsolationForestConfig fc = cfg.forest;
  fc.seed = derive_seed(g.seed, 0xf0);
  const nlohmann::json key = {{"data", data.fingerprint()}, {"forest", to_json(fc)},
                              {"contamination", cfg.outlier_fraction}};
  const nlohmann::json doc = stages.run("isolation_forest", key, true, [&] {
    IsolationForest forest = fit_isolation_forest(data.features, fc);
    forest.calibrate_offset(data.features, cfg.outlier_fraction);
    return forest.to_json();
  });
  return std::make_shared<IsolationForest>(IsolationForest::from_json(doc));
}

}  // namespace

nlohmann::json OutlierStudyConfig::to_json() const {
  return {{"sigmas", sigmas},
          {"n_points", n_points},
          {"outlier_fraction", outlier_fraction},
          {"forest", onshap::to_json(forest)},
          {"n_permutations", n_permutations},
          {"n_inner", n_inner},
          {"antithetic", antithetic},
          {"max_outliers", max_outliers},
          {"histogram_sigma", histogram_sigma},
          {"histogram_coalitions", histogram_coalitions},
          {"seed", seed}};
}

OutlierStudyConfig OutlierStudyConfig::from_json(const nlohmann::json& doc,
                                                 const OutlierStudyConfig& defaults) {
  OutlierStudyConfig c = defaults;
  c.sigmas = doc.value("sigmas", c.sigmas);
  c.n_points = doc.value("n_points", c.n_points);
  c.outlier_fraction = doc.value("outlier_fraction", c.outlier_fraction);
  if (doc.contains("forest")) c.forest = isolation_config_from_json(doc.at("forest"), c.forest);
  c.n_permutations = doc.value("n_permutations", c.n_permutations);
  c.n_inner = doc.value("n_inner", c.n_inner);
  c.antithetic = doc.value("antithetic", c.antithetic);
  c.max_outliers = doc.value("max_outliers", c.max_outliers);
  c.histogram_sigma = doc.value("histogram_sigma", c.histogram_sigma);
  c.histogram_coalitions = doc.value("histogram_coalitions", c.histogram_coalitions);
  c.seed = doc.value("seed", c.seed);
  if (c.sigmas.empty()) throw UsageError("the outlier study needs at least one sigma");
  return c;
}

nlohmann::json OutlierSigmaResult::to_json() const {
  return {{"sigma", sigma},
          {"forest_accuracy", forest_accuracy},
          {"n_explained", n_explained},
          {"off_error_rate", off_error_rate},
          {"on_error_rate", on_error_rate},
          {"off_example", off_example.to_json()},
          {"on_example", on_example.to_json()}};
}

OutlierSigmaResult OutlierSigmaResult::from_json(const nlohmann::json& doc) {
  OutlierSigmaResult r;
  r.sigma = doc.at("sigma").get<double>();
  r.forest_accuracy = doc.at("forest_accuracy").get<double>();
  r.n_explained = doc.at("n_explained").get<std::size_t>();
  r.off_error_rate = doc.at("off_error_rate").get<double>();
  r.on_error_rate = doc.at("on_error_rate").get<double>();
  r.off_example = Attribution::from_json(doc.at("off_example"));
  r.on_example = Attribution::from_json(doc.at("on_example"));
  return r;
}

double CoalitionOutputs::ks_on_inlier() const { return ks_distance(on_inlier_coalitions, data_inliers); }
double CoalitionOutputs::ks_off_inlier() const { return ks_distance(off_inlier_coalitions, data_inliers); }
double CoalitionOutputs::ks_on_outlier() const { return ks_distance(on_outlier_coalitions, data_outliers); }
double CoalitionOutputs::ks_off_outlier() const { return ks_distance(off_outlier_coalitions, data_outliers); }

nlohmann::json CoalitionOutputs::to_json() const {
  return {{"sigma", sigma},
          {"data_inliers", data_inliers},
          {"data_outliers", data_outliers},
          {"off_inlier_coalitions", off_inlier_coalitions},
          {"on_inlier_coalitions", on_inlier_coalitions},
          {"off_outlier_coalitions", off_outlier_coalitions},
          {"on_outlier_coalitions", on_outlier_coalitions}};
}

CoalitionOutputs CoalitionOutputs::from_json(const nlohmann::json& doc) {
  CoalitionOutputs c;
  c.sigma = doc.at("sigma").get<double>();
  c.data_inliers = doc.at("data_inliers").get<std::vector<double>>();
  c.data_outliers = doc.at("data_outliers").get<std::vector<double>>();
  c.off_inlier_coalitions = doc.at("off_inlier_coalitions").get<std::vector<double>>();
  c.on_inlier_coalitions = doc.at("on_inlier_coalitions").get<std::vector<double>>();
  c.off_outlier_coalitions = doc.at("off_outlier_coalitions").get<std::vector<double>>();
  c.on_outlier_coalitions = doc.at("on_outlier_coalitions").get<std::vector<double>>();
  return c;
}

std::string OutlierStudyResult::error_rate_csv() const {
  std::ostringstream out;
  out.precision(6);
  out << "sigma,forest_accuracy,n_explained,off_manifold_error_rate,on_manifold_error_rate\n";
  for (const auto& r : per_sigma) {
    out << r.sigma << ',' << r.forest_accuracy << ',' << r.n_explained << ',' << r.off_error_rate
        << ',' << r.on_error_rate << '\n';
  }
  return out.str();
}

nlohmann::json OutlierStudyResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : per_sigma) rows.push_back(r.to_json());
  return {{"per_sigma", rows}, {"coalition_outputs", coalition_outputs.to_json()}};
}

OutlierStudyResult OutlierStudyResult::from_json(const nlohmann::json& doc) {
  OutlierStudyResult r;
  for (const auto& row : doc.at("per_sigma")) r.per_sigma.push_back(OutlierSigmaResult::from_json(row));
  r.coalition_outputs = CoalitionOutputs::from_json(doc.at("coalition_outputs"));
  return r;
}

OutlierSigmaResult run_outlier_sigma(StageRunner& stages, const OutlierStudyConfig& cfg, double sigma) {
  const OutlierGenConfig g = gen_config(cfg, sigma);
  const Dataset data = gen_outlier_data(g);
  const auto forest = fitted_forest(stages, cfg, data, g);
  const nlohmann::json key = {{"config", cfg.to_json()}, {"sigma", sigma},
                              {"model", model_fingerprint(*forest)}};
  const nlohmann::json doc = stages.run("outlier_explanations", key, false, [&] {
    OutlierSigmaResult r;
    r.sigma = sigma;
    const Matrix pred = forest->predict(data.features);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      correct += (pred(i, 0) > 0.0) == ((*data.labels)[static_cast<std::size_t>(i)] == 1);
    }
    r.forest_accuracy = static_cast<double>(correct) / static_cast<double>(pred.rows());

    const auto background = std::make_shared<const Matrix>(data.features);
    const auto sampler = std::make_shared<const OutlierConditionalSampler>(g);
    std::vector<std::size_t> truth(g.flipped_features);
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = i;
    std::size_t off_errors = 0, on_errors = 0;
    for (std::size_t row = 0; row < data.n_rows(); ++row) {
      if ((*data.labels)[row] != 1) continue;
      if (cfg.max_outliers && r.n_explained >= cfg.max_outliers) break;
      const Vector x = data.features.row(static_cast<Eigen::Index>(row)).transpose();
      OffManifoldVf off(forest, background, x, 0, cfg.n_inner);
      SamplerVf on(forest, sampler, x, 0, cfg.n_inner);
      McOptions opt;
      opt.n_samples = cfg.n_permutations;
      opt.antithetic = cfg.antithetic;
      opt.seed = derive_seed(g.seed, 0xe0, row);
      Attribution a_off = shapley_mc(off, opt);
      Attribution a_on = shapley_mc(on, opt);
      off_errors += explanation_in_error(a_off.values, truth);
      on_errors += explanation_in_error(a_on.values, truth);
      if (r.n_explained == 0) {
        a_off.point_index = a_on.point_index = row;
        a_off.feature_names = a_on.feature_names = data.feature_names();
        r.off_example = a_off;
        r.on_example = a_on;
      }
      ++r.n_explained;
    }
    if (r.n_explained == 0) throw DataError("the generated data contains no outliers");
    r.off_error_rate = static_cast<double>(off_errors) / static_cast<double>(r.n_explained);
    r.on_error_rate = static_cast<double>(on_errors) / static_cast<double>(r.n_explained);
    return r.to_json();
  });
  return OutlierSigmaResult::from_json(doc);
}

CoalitionOutputs run_coalition_outputs(StageRunner& stages, const OutlierStudyConfig& cfg) {
  const OutlierGenConfig g = gen_config(cfg, cfg.histogram_sigma);
  const Dataset data = gen_outlier_data(g);
  const auto forest = fitted_forest(stages, cfg, data, g);
  const nlohmann::json key = {{"sigma", cfg.histogram_sigma},
                              {"coalitions", cfg.histogram_coalitions},
                              {"model", model_fingerprint(*forest)}};
  const nlohmann::json doc = stages.run("coalition_outputs", key, false, [&] {
    CoalitionOutputs c;
    c.sigma = cfg.histogram_sigma;
    const Matrix pred = forest->predict(data.features);
    std::vector<std::size_t> outliers;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
      ((*data.labels)[i] == 1 ? c.data_outliers : c.data_inliers).push_back(pred(static_cast<Eigen::Index>(i), 0));
      if ((*data.labels)[i] == 1) outliers.push_back(i);
    }
    const OutlierConditionalSampler sampler(g);
    const std::size_t n = data.n_features();
    Rng rng = make_rng(g.seed, 0xc0);
    std::uniform_int_distribution<std::size_t> pick_outlier(0, outliers.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_row(0, data.n_rows() - 1);
    Matrix off_rows(static_cast<Eigen::Index>(cfg.histogram_coalitions), static_cast<Eigen::Index>(n));
    Matrix on_rows(off_rows.rows(), off_rows.cols());
    std::vector<int> kind(cfg.histogram_coalitions, -1);  // 0 inlier coalition, 1 outlier coalition
    for (std::size_t k = 0; k < cfg.histogram_coalitions; ++k) {
      const Vector x = data.features.row(static_cast<Eigen::Index>(outliers[pick_outlier(rng)])).transpose();
      const Coalition s = sample_shapley_coalition(n, rng);
      std::size_t flipped_in = 0;
      for (std::size_t i = 0; i < g.flipped_features; ++i) flipped_in += s.contains(i);
      if (flipped_in == 0) kind[k] = 0;
      if (flipped_in == g.flipped_features) kind[k] = 1;
      const auto src = static_cast<Eigen::Index>(pick_row(rng));
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        off_rows(static_cast<Eigen::Index>(k), c) = s.contains(i) ? x[c] : data.features(src, c);
      }
      on_rows.row(static_cast<Eigen::Index>(k)) = sampler.sample(x, std::span<const Coalition>(&s, 1), 1, rng);
    }
    const Matrix off_pred = forest->predict(off_rows);
    const Matrix on_pred = forest->predict(on_rows);
    for (std::size_t k = 0; k < kind.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      if (kind[k] == 0) {
        c.off_inlier_coalitions.push_back(off_pred(r, 0));
        c.on_inlier_coalitions.push_back(on_pred(r, 0));
      } else if (kind[k] == 1) {
        c.off_outlier_coalitions.push_back(off_pred(r, 0));
        c.on_outlier_coalitions.push_back(on_pred(r, 0));
      }
    }
    return c.to_json();
  });
  return CoalitionOutputs::from_json(doc);
}

OutlierStudyResult run_outlier_study(StageRunner& stages, const OutlierStudyConfig& cfg) {
  OutlierStudyResult r;
  for (double sigma : cfg.sigmas) r.per_sigma.push_back(run_outlier_sigma(stages, cfg, sigma));
  r.coalition_outputs = run_coalition_outputs(stages, cfg);
  return r;
}

}  // namespace onshap
