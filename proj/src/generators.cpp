#include "onshap/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace onshap {
namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

ColumnSchema binary_column(std::string name) {
  ColumnSchema c;
  c.name = std::move(name);
  c.kind = FeatureKind::binary;
  c.n_categories = 2;
  c.categories = {"0", "1"};
  return c;
}

ColumnSchema continuous_column(std::string name, double lo = 0.0, double hi = 1.0) {
  ColumnSchema c;
  c.name = std::move(name);
  c.source_min = lo;
  c.source_max = hi;
  return c;
}

void finish(Dataset& data, std::uint64_t seed) {
  data.split_seed = seed;
  data.split = make_split(data.n_rows(), seed, data.split_fractions);
  check_sentinel_safety(data);
}

}  // namespace

void OutlierGenConfig::validate() const {
  if (!(outlier_fraction > 0.0 && outlier_fraction < 1.0)) {
    throw UsageError("outlier_fraction must lie in (0, 1)");
  }
  if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
  if (n_points == 0 || n_features == 0) throw UsageError("empty outlier data requested");
  if (flipped_features > n_features) throw UsageError("more flipped features than features");
}

std::size_t OutlierGenConfig::n_outliers() const {
  return static_cast<std::size_t>(std::llround(outlier_fraction * static_cast<double>(n_points)));
}

nlohmann::json OutlierGenConfig::to_json() const {
  return {{"generator", "outlier"},
          {"n_points", n_points},
          {"sigma", sigma},
          {"outlier_fraction", outlier_fraction},
          {"n_features", n_features},
          {"flipped_features", flipped_features},
          {"seed", seed}};
}

Dataset gen_outlier_data(const OutlierGenConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 0x0a7);
  std::vector<int> labels(cfg.n_points, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(cfg.n_outliers()), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset data;
  data.name = "outlier_sigma" + std::to_string(cfg.sigma);
  data.features.resize(static_cast<Eigen::Index>(cfg.n_points),
                       static_cast<Eigen::Index>(cfg.n_features));
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  for (std::size_t r = 0; r < cfg.n_points; ++r) {
    const double z = coin(rng) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < cfg.n_features; ++i) {
      const bool flip = labels[r] == 1 && i < cfg.flipped_features;
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
          (flip ? 1.0 - z : z) + noise(rng);
    }
  }
  for (std::size_t i = 0; i < cfg.n_features; ++i) {
    data.schema.push_back(continuous_column("x" + std::to_string(i + 1)));
  }
  data.labels = std::move(labels);
  data.n_classes = 2;
  data.provenance = cfg.to_json();
  finish(data, cfg.seed);
  return data;
}

JointTable JointTable::from_conditionals(double p_x0, std::array<double, 2> p_x1_given_x0,
                                         std::array<std::array<double, 2>, 2> p_y_given_x) {
  JointTable t;
  for (int a = 0; a < 2; ++a) {
    const double pa = a ? p_x0 : 1.0 - p_x0;
    for (int b = 0; b < 2; ++b) {
      const double pb = b ? p_x1_given_x0[a] : 1.0 - p_x1_given_x0[a];
      const double py = p_y_given_x[a][b];
      t.p[a][b][1] = pa * pb * py;
      t.p[a][b][0] = pa * pb * (1.0 - py);
    }
  }
  return t;
}

JointTable JointTable::default_table() {
  return from_conditionals(0.5, {0.05, 0.95}, {{{0.2, 0.02}, {0.9, 0.7}}});
}

void JointTable::validate() const {
  double total = 0.0;
  for (const auto& a : p) {
    for (const auto& b : a) {
      for (double v : b) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("joint table has a negative cell");
        total += v;
      }
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("joint table cells sum to " + std::to_string(total) + ", not 1");
  }
}

double JointTable::p_y_given(int x0, int x1) const {
  const double px = p_x(x0, x1);
  return px > 0.0 ? p[x0][x1][1] / px : 0.0;
}

double JointTable::feature_correlation() const {
  const double e0 = p_x(1, 0) + p_x(1, 1);
  const double e1 = p_x(0, 1) + p_x(1, 1);
  const double cov = p_x(1, 1) - e0 * e1;
  const double var = e0 * (1.0 - e0) * e1 * (1.0 - e1);
  return var > 0.0 ? cov / std::sqrt(var) : 0.0;
}

nlohmann::json JointTable::to_json() const {
  auto cells = nlohmann::json::array();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int y = 0; y < 2; ++y) cells.push_back({{"x0", a}, {"x1", b}, {"y", y}, {"p", p[a][b][y]}});
    }
  }
  return {{"cells", cells}};
}

JointTable JointTable::from_json(const nlohmann::json& doc) {
  JointTable t;
  for (const auto& c : doc.at("cells")) {
    t.p[c.at("x0").get<int>()][c.at("x1").get<int>()][c.at("y").get<int>()] = c.at("p").get<double>();
  }
  t.validate();
  return t;
}

Dataset gen_two_feature_data(const JointTable& table, std::size_t n_points, std::uint64_t seed) {
  table.validate();
  std::vector<double> weights;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int y = 0; y < 2; ++y) weights.push_back(table.p[a][b][y]);
    }
  }
  std::discrete_distribution<int> cell(weights.begin(), weights.end());
  Rng rng = make_rng(seed, 0x2f);
  Dataset data;
  data.name = "two_feature";
  data.features.resize(static_cast<Eigen::Index>(n_points), 2);
  std::vector<int> labels(n_points);
  for (std::size_t r = 0; r < n_points; ++r) {
    const int c = cell(rng);
    data.features(static_cast<Eigen::Index>(r), 0) = (c >> 2) & 1;
    data.features(static_cast<Eigen::Index>(r), 1) = (c >> 1) & 1;
    labels[r] = c & 1;
  }
  data.schema = {binary_column("x0"), binary_column("x1")};
  data.labels = std::move(labels);
  data.n_classes = 2;
  data.provenance = {{"generator", "two_feature"}, {"table", table.to_json()}, {"seed", seed}};
  finish(data, seed);
  return data;
}

Dataset gen_drug_like(std::size_t n_points, std::uint64_t seed) {
  static const std::array<const char*, 10> kNames = {
      "Amphetamines", "Amyl", "Benzodiazepines", "Cannabis", "Cocaine",
      "Crack", "Ecstasy", "Heroin", "Ketamine", "Mushrooms"};
  // Per-feature offset and propensity loading.
  static const std::array<double, 10> kOffset = {-0.6, -1.0, -0.5, 1.0, -0.3,
                                                 -2.6, -0.4, -2.4, -1.5, -0.4};
  static const std::array<double, 10> kLoading = {2.2, 1.2, 1.6, 2.4, 2.0,
                                                  1.8, 2.6, 2.0, 2.0, 2.6};
  Rng rng = make_rng(seed, 0xd7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  data.name = "drug_like";
  data.features.resize(static_cast<Eigen::Index>(n_points), 10);
  std::vector<int> labels(n_points);
  for (std::size_t r = 0; r < n_points; ++r) {
    const double u = normal(rng);
    for (std::size_t j = 0; j < 10; ++j) {
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          unif(rng) < sigmoid(kOffset[j] + kLoading[j] * u) ? 1.0 : 0.0;
    }
    const double mushrooms = data.features(static_cast<Eigen::Index>(r), 9);
    const double ecstasy = data.features(static_cast<Eigen::Index>(r), 6);
    labels[r] = unif(rng) < sigmoid(-3.0 + 2.6 * mushrooms + 1.6 * ecstasy + 0.8 * u) ? 1 : 0;
  }
  for (const char* name : kNames) data.schema.push_back(binary_column(name));
  data.labels = std::move(labels);
  data.n_classes = 2;
  data.provenance = {{"generator", "drug_like"}, {"n_points", n_points}, {"seed", seed}};
  finish(data, seed);
  return data;
}

Dataset gen_census_like(std::size_t n_points, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xce);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  data.name = "census_like";
  data.features.resize(static_cast<Eigen::Index>(n_points), 6);
  std::vector<int> labels(n_points);
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (std::size_t r = 0; r < n_points; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const double sex = unif(rng) < 0.67 ? 1.0 : 0.0;
    const double age = clamp01(0.35 + 0.18 * normal(rng));
    const double married = unif(rng) < sigmoid(-1.0 + 4.0 * age) ? 1.0 : 0.0;
    // The proxy is nearly determined by sex among married people.
    const double husband = married * (unif(rng) < (sex == 1.0 ? 0.95 : 0.03) ? 1.0 : 0.0);
    const double education = clamp01(0.55 + 0.2 * normal(rng));
    const double hours = clamp01(0.32 + 0.2 * sex + 0.1 * normal(rng));
    data.features.row(row) << sex, husband, married, age, education, hours;
    // Sex acts mostly through the proxies, as relationship and hours carry it in census data.
    const double logit = -6.7 + 0.8 * sex + 2.0 * husband + 0.4 * married + 2.0 * age +
                         3.0 * education + 3.0 * hours;
    labels[r] = unif(rng) < sigmoid(logit) ? 1 : 0;
  }
  data.schema = {binary_column("sex"), binary_column("husband"), binary_column("married"),
                 continuous_column("age"), continuous_column("education"),
                 continuous_column("hours_per_week")};
  data.labels = std::move(labels);
  data.n_classes = 2;
  data.provenance = {{"generator", "census_like"}, {"n_points", n_points}, {"seed", seed}};
  finish(data, seed);
  return data;
}

}  // namespace onshap
