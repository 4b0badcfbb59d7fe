#include <fstream>
#include <set>

#include "doctest.h"
#include "onshap/generators.hpp"
#include "onshap/loaders.hpp"
#include "test_support.hpp"

using namespace onshap;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string drug_row(int id, bool user) {
  std::string row = std::to_string(id) + ",0.5,-0.48,0.45,0.96,-0.31,0.3,0.1,0.2,0.3,0.4,0.5,0.6";
  for (int c = 13; c < 32; ++c) row += (c % 3 == 0 || (c == 26 && user)) ? ",CL3" : ",CL0";
  return row + "\n";
}

}  // namespace

TEST_CASE("splits partition the rows") {
  const Split s = make_split(1000, 3);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1000);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == 1000);
  CHECK(s.train.size() == 700);
  CHECK(make_split(1000, 3).test == s.test);
  CHECK(make_split(1000, 4).test != s.test);
}

TEST_CASE("outlier generator plants the flipped block") {
  OutlierGenConfig cfg;
  cfg.sigma = 0.01;
  cfg.seed = 2;
  const Dataset d = gen_outlier_data(cfg);
  CHECK(d.n_rows() == 10000);
  CHECK(d.n_features() == 20);
  std::size_t outliers = 0;
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    const auto row = d.features.row(static_cast<Eigen::Index>(r));
    const bool flipped = std::abs(row[0] - row[10]) > 0.5;
    CHECK(flipped == ((*d.labels)[r] == 1));
    outliers += (*d.labels)[r];
  }
  CHECK(outliers == 100);
  CHECK(gen_outlier_data(cfg).fingerprint() == d.fingerprint());
}

TEST_CASE("two-feature table and sampler agree") {
  const JointTable t = JointTable::default_table();
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int y = 0; y < 2; ++y) total += t.p[a][b][y];
  CHECK(total == doctest::Approx(1.0));
  CHECK(JointTable::from_json(t.to_json()).to_json() == t.to_json());
  const Dataset d = gen_two_feature_data(t, 40000, 1);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    hits += d.features(static_cast<Eigen::Index>(r), 0) == 1 && d.features(static_cast<Eigen::Index>(r), 1) == 1 &&
            (*d.labels)[r] == 1;
  }
  CHECK(static_cast<double>(hits) / 40000 == doctest::Approx(t.p[1][1][1]).epsilon(0.05));
}

TEST_CASE("dataset manifests round-trip") {
  const Dataset d = gen_census_like(300, 4);
  const auto dir = onshap::testing::temp_dir("dataset");
  save_dataset(d, dir / "census.json");
  const Dataset back = load_dataset(dir / "census.json");
  CHECK(back.fingerprint() == d.fingerprint());
  CHECK(back.features == d.features);
  CHECK(back.split.test == d.split.test);
  CHECK(back.feature_names() == d.feature_names());
}

TEST_CASE("drug loader binarises usage classes") {
  const auto dir = onshap::testing::temp_dir("drug");
  std::string text;
  for (int i = 0; i < 40; ++i) text += drug_row(i, i % 4 == 0);
  write_text(dir / "drug.data", text);
  const Dataset d = load_tabular(dir / "drug.data", TabularSpec::preset("drug"), 1);
  CHECK(d.n_rows() == 40);
  CHECK(d.n_features() == 10);
  CHECK(d.feature_names().front() == "Amphetamines");
  for (std::size_t r = 0; r < 40; ++r) CHECK((*d.labels)[r] == (r % 4 == 0 ? 1 : 0));
  // Amphetamines is column 14 (CL0), Cannabis is column 18 (CL3).
  CHECK(d.features(0, 0) == 0.0);
  CHECK(d.features(0, 3) == 1.0);
  CHECK(d.provenance.contains("source_sha256"));
}

TEST_CASE("loader errors are actionable") {
  CHECK_THROWS_AS(load_tabular("/nonexistent/drug.data", TabularSpec::preset("drug"), 0), DataError);
  const auto dir = onshap::testing::temp_dir("badrow");
  write_text(dir / "bad.data", drug_row(0, true) + "1,2,3\n");
  try {
    load_tabular(dir / "bad.data", TabularSpec::preset("drug"), 0);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(TabularSpec::preset("iris"), UsageError);
}

TEST_CASE("abalone loader scales and splits at the median") {
  const auto dir = onshap::testing::temp_dir("abalone");
  write_text(dir / "abalone.data",
             "M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\n"
             "F,0.35,0.265,0.09,0.2255,0.0995,0.0485,0.07,7\n"
             "I,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\n"
             "M,0.44,0.365,0.125,0.516,0.2155,0.114,0.155,10\n");
  const Dataset d = load_tabular(dir / "abalone.data", TabularSpec::preset("abalone"), 0);
  CHECK(d.n_features() == 8);
  CHECK(d.features.col(1).maxCoeff() == doctest::Approx(1.0));
  CHECK(d.features.col(1).minCoeff() == doctest::Approx(0.0));
  CHECK(*d.labels == std::vector<int>{1, 0, 0, 1});
  const TabularSpec spec = TabularSpec::preset("abalone");
  CHECK(TabularSpec::from_json(spec.to_json()).to_json() == spec.to_json());
}

TEST_CASE("idx images round-trip and binarise") {
  const auto dir = onshap::testing::temp_dir("idx");
  std::vector<std::uint8_t> pixels = {0, 127, 128, 255, 10, 200, 90, 140};
  write_idx_images(dir / "img", 2, 2, pixels);
  write_idx_labels(dir / "lab", {3, 7});
  const Dataset d = load_binary_mnist(dir / "img", dir / "lab", 0.5, std::nullopt, 0);
  CHECK(d.n_rows() == 2);
  CHECK(d.n_features() == 4);
  CHECK(d.features.row(0) == (RowVector(4) << 0, 0, 1, 1).finished());
  CHECK(d.features.row(1) == (RowVector(4) << 0, 1, 0, 1).finished());
  CHECK(*d.labels == std::vector<int>{3, 7});
  CHECK(d.n_classes >= 10);
  CHECK(d.feature_names()[3] == "px1_1");
}

TEST_CASE("digits fixture loads as a small binary mnist") {
  const std::filesystem::path data = ONSHAP_TEST_DATA;
  const Dataset d = load_binary_mnist(data / "digits-images-idx3-ubyte", data / "digits-labels-idx1-ubyte", 0.5,
                                      std::size_t{500}, 0);
  CHECK(d.n_rows() == 500);
  CHECK(d.n_features() == 64);
  CHECK(d.provenance.at("image_rows") == 8);
  CHECK_THROWS_AS(load_binary_mnist(data / "digits-labels-idx1-ubyte", std::nullopt, 0.5, std::nullopt, 0), DataError);
}
