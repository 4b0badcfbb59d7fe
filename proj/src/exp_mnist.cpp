#include <algorithm>

#include "onshap/experiments.hpp"
#include "onshap/metrics.hpp"

namespace onshap {
namespace {

nlohmann::json sum_rule_json(const SumRuleReport& r) {
  return {{"observed", r.observed}, {"expected", r.expected}, {"residual", r.residual},
          {"std_error", r.std_error}};
}

SumRuleReport sum_rule_from_json(const nlohmann::json& doc) {
  SumRuleReport r;
  r.observed = doc.at("observed").get<double>();
  r.expected = doc.at("expected").get<double>();
  r.residual = doc.at("residual").get<double>();
  r.std_error = doc.at("std_error").get<double>();
  return r;
}

/// First test row of each true digit, in digit order.
std::vector<std::size_t> pick_digits(const Dataset& d, std::size_t n_digits) {
  std::vector<std::size_t> picked;
  for (int digit = 0; digit < static_cast<int>(d.n_classes) && picked.size() < n_digits; ++digit) {
    for (std::size_t row : d.split.test) {
      if ((*d.labels)[row] == digit) {
        picked.push_back(row);
        break;
      }
    }
  }
  return picked;
}

std::vector<double> abs_values(const Attribution& a) {
  std::vector<double> out(a.values.size());
  std::transform(a.values.begin(), a.values.end(), out.begin(), [](double v) { return std::abs(v); });
  return out;
}

}  // namespace

nlohmann::json MnistConfig::to_json() const {
  return {{"source", source.to_json()},
          {"pipeline", pipeline.to_json()},
          {"n_digits", n_digits},
          {"samples_per_pixel", samples_per_pixel},
          {"summand_samples", summand_samples},
          {"seed", seed}};
}

MnistConfig MnistConfig::from_json(const nlohmann::json& doc, const MnistConfig& defaults) {
  MnistConfig c = defaults;
  if (doc.contains("source")) {
    nlohmann::json merged = c.source.to_json();
    merged.merge_patch(doc.at("source"));
    c.source = DataSource::from_json(merged);
  }
  if (doc.contains("pipeline")) c.pipeline = PipelineConfig::from_json(doc.at("pipeline"), c.pipeline);
  c.n_digits = doc.value("n_digits", c.n_digits);
  c.samples_per_pixel = doc.value("samples_per_pixel", c.samples_per_pixel);
  c.summand_samples = doc.value("summand_samples", c.summand_samples);
  c.seed = doc.value("seed", c.seed);
  if (c.samples_per_pixel == 0) throw UsageError("samples_per_pixel must be positive");
  return c;
}

nlohmann::json MnistLocalResult::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : digits) {
    out.push_back({{"test_index", d.test_index},
                   {"predicted_class", d.predicted_class},
                   {"off_manifold", d.off_manifold.to_json()},
                   {"on_manifold", d.on_manifold.to_json()},
                   {"off_sum_rule", sum_rule_json(d.off_sum_rule)},
                   {"on_sum_rule", sum_rule_json(d.on_sum_rule)},
                   {"off_gini", d.off_gini},
                   {"on_gini", d.on_gini}});
  }
  return {{"image_rows", image_rows}, {"image_cols", image_cols}, {"test_accuracy", test_accuracy},
          {"digits", out}};
}

MnistLocalResult MnistLocalResult::from_json(const nlohmann::json& doc) {
  MnistLocalResult r;
  r.image_rows = doc.at("image_rows").get<std::size_t>();
  r.image_cols = doc.at("image_cols").get<std::size_t>();
  r.test_accuracy = doc.at("test_accuracy").get<double>();
  for (const auto& d : doc.at("digits")) {
    MnistDigit m;
    m.test_index = d.at("test_index").get<std::size_t>();
    m.predicted_class = d.at("predicted_class").get<int>();
    m.off_manifold = Attribution::from_json(d.at("off_manifold"));
    m.on_manifold = Attribution::from_json(d.at("on_manifold"));
    m.off_sum_rule = sum_rule_from_json(d.at("off_sum_rule"));
    m.on_sum_rule = sum_rule_from_json(d.at("on_sum_rule"));
    m.off_gini = d.at("off_gini").get<double>();
    m.on_gini = d.at("on_gini").get<double>();
    r.digits.push_back(std::move(m));
  }
  return r;
}

MnistLocalResult run_mnist_local(StageRunner& stages, const MnistConfig& cfg) {
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline p = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, true, false);
  MnistLocalResult r;
  r.image_rows = p.data.provenance.value("image_rows", std::size_t{0});
  r.image_cols = p.data.provenance.value("image_cols", std::size_t{0});
  r.test_accuracy = p.test_accuracy;

  const std::vector<std::size_t> rows = pick_digits(p.data, cfg.n_digits);
  const nlohmann::json key = {{"model", p.model_fingerprint},
                              {"data", p.data.fingerprint()},
                              {"surrogate", sha256_hex(p.surrogate->to_json().dump())},
                              {"rows", rows},
                              {"max_background", p.cfg.max_background},
                              {"samples_per_pixel", cfg.samples_per_pixel},
                              {"seed", cfg.seed}};
  const nlohmann::json doc = stages.run("local_explanations", key, false, [&] {
    const VfFactory off = p.factory(VfMethod::off_manifold, 1);
    const VfFactory on = p.factory(VfMethod::surrogate, 1);
    MnistLocalResult out;
    out.image_rows = r.image_rows;
    out.image_cols = r.image_cols;
    out.test_accuracy = r.test_accuracy;
    for (std::size_t row : rows) {
      const Vector x = p.data.features.row(static_cast<Eigen::Index>(row)).transpose();
      const Vector probs = p.model->predict_row(x);
      MnistDigit d;
      d.test_index = row;
      d.predicted_class = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      McOptions mc;
      mc.n_samples = cfg.samples_per_pixel;
      mc.antithetic = true;
      mc.seed = derive_seed(cfg.seed, 0x7a, row);
      const ValueFunctionPtr v_off = off(x, d.predicted_class);
      const ValueFunctionPtr v_on = on(x, d.predicted_class);
      for (auto [v, a] : {std::pair{v_off.get(), &d.off_manifold}, std::pair{v_on.get(), &d.on_manifold}}) {
        *a = shapley_mc(*v, mc);
        a->feature_names = p.data.feature_names();
        a->point_index = row;
        a->target_class = d.predicted_class;
      }
      d.off_sum_rule = sum_rule_check(d.off_manifold, *v_off, cfg.samples_per_pixel,
                                      derive_seed(cfg.seed, 0x7b, row));
      d.on_sum_rule = sum_rule_check(d.on_manifold, *v_on, 1, derive_seed(cfg.seed, 0x7b, row));
      d.off_gini = gini_coefficient(abs_values(d.off_manifold));
      d.on_gini = gini_coefficient(abs_values(d.on_manifold));
      out.digits.push_back(std::move(d));
    }
    return out.to_json();
  });
  return MnistLocalResult::from_json(doc);
}

nlohmann::json MnistSummandResult::to_json() const {
  return {{"off_profile", off_profile},
          {"on_profile", on_profile},
          {"off_small_mass", off_small_mass},
          {"on_small_mass", on_small_mass}};
}

// Masses are derived from the stored sums, never read back.
MnistSummandResult MnistSummandResult::from_json(const nlohmann::json& doc) {
  const SizeProfile off = SizeProfile::from_json(doc.at("off_profile"));
  const SizeProfile on = SizeProfile::from_json(doc.at("on_profile"));
  return {off.to_json(), on.to_json(), off.small_coalition_mass(), on.small_coalition_mass()};
}

MnistSummandResult run_mnist_summand(StageRunner& stages, const MnistConfig& cfg) {
  Dataset data = acquire_dataset(cfg.source, derive_seed(cfg.seed, 0xd1));
  const Pipeline p = build_pipeline(stages, std::move(data), cfg.pipeline, cfg.seed, true, false);
  const nlohmann::json key = {{"model", p.model_fingerprint},
                              {"data", p.data.fingerprint()},
                              {"surrogate", sha256_hex(p.surrogate->to_json().dump())},
                              {"max_background", p.cfg.max_background},
                              {"samples", cfg.summand_samples},
                              {"seed", cfg.seed}};
  const nlohmann::json doc = stages.run("summand_profiles", key, false, [&] {
    const Matrix test = p.test_x();
    const std::vector<int> y = p.test_y();
    const SizeProfile off = summand_by_coalition_size(test, y, p.factory(VfMethod::off_manifold, 1),
                                                      cfg.summand_samples, derive_seed(cfg.seed, 0x7c));
    const SizeProfile on = summand_by_coalition_size(test, y, p.factory(VfMethod::surrogate, 1),
                                                     cfg.summand_samples, derive_seed(cfg.seed, 0x7d));
    return MnistSummandResult{off.to_json(), on.to_json(), off.small_coalition_mass(),
                              on.small_coalition_mass()}
        .to_json();
  });
  return MnistSummandResult::from_json(doc);
}

}  // namespace onshap
