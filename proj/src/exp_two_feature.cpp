#include "onshap/experiments.hpp"
#include "onshap/model_io.hpp"

namespace onshap {

nlohmann::json TwoFeatureConfig::to_json() const {
  return {{"table", table.to_json()},
          {"n_points", n_points},
          {"n_global_samples", n_global_samples},
          {"seed", seed}};
}

TwoFeatureConfig TwoFeatureConfig::from_json(const nlohmann::json& doc,
                                             const TwoFeatureConfig& defaults) {
  TwoFeatureConfig c = defaults;
  if (doc.contains("table")) c.table = JointTable::from_json(doc.at("table"));
  c.n_points = doc.value("n_points", c.n_points);
  c.n_global_samples = doc.value("n_global_samples", c.n_global_samples);
  c.seed = doc.value("seed", c.seed);
  return c;
}

nlohmann::json TwoFeatureResult::to_json() const {
  return {{"tree_p1", tree_p1},
          {"off_manifold", off_manifold.to_json()},
          {"on_manifold", on_manifold.to_json()}};
}

TwoFeatureResult TwoFeatureResult::from_json(const nlohmann::json& doc) {
  TwoFeatureResult r;
  r.tree_p1 = doc.at("tree_p1").get<std::array<std::array<double, 2>, 2>>();
  r.off_manifold = Attribution::from_json(doc.at("off_manifold"));
  r.on_manifold = Attribution::from_json(doc.at("on_manifold"));
  return r;
}

TwoFeatureResult run_two_feature_globals(StageRunner& stages, const TwoFeatureConfig& cfg) {
  cfg.table.validate();
  const Dataset data = gen_two_feature_data(cfg.table, cfg.n_points, derive_seed(cfg.seed, 0x2f));
  const Matrix train = data.rows(data.split.train);
  const std::vector<int> train_y = data.labels_of(data.split.train);
  const nlohmann::json tree_doc =
      stages.run("model", {{"data", data.fingerprint()}, {"kind", "decision_tree"}}, true, [&] {
        return fit_decision_tree(train, train_y, 2, TreeConfig{}, derive_seed(cfg.seed, 0x2e)).to_json();
      });
  const ModelPtr tree = model_from_json(tree_doc);
  const nlohmann::json key = {{"model", model_fingerprint(*tree)}, {"config", cfg.to_json()}};
  const nlohmann::json doc = stages.run("two_feature_globals", key, false, [&] {
    TwoFeatureResult r;
    Matrix corners(4, 2);
    corners << 0, 0, 0, 1, 1, 0, 1, 1;
    const Matrix p = tree->predict(corners);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) r.tree_p1[a][b] = p(2 * a + b, 1);
    }
    const Matrix test = data.rows(data.split.test);
    const std::vector<int> test_y = data.labels_of(data.split.test);
    const auto background = std::make_shared<const Matrix>(train);
    const auto context = std::make_shared<const EmpiricalConditionalContext>(tree, train);
    r.off_manifold = shapley_global(test, test_y, off_manifold_factory(tree, background),
                                    cfg.n_global_samples, derive_seed(cfg.seed, 0x2a));
    r.on_manifold = shapley_global(test, test_y, empirical_factory(context), cfg.n_global_samples,
                                   derive_seed(cfg.seed, 0x2b));
    r.off_manifold.feature_names = r.on_manifold.feature_names = data.feature_names();
    return r.to_json();
  });
  return TwoFeatureResult::from_json(doc);
}

}  // namespace onshap
