#include "doctest.h"
#include "onshap/artifacts.hpp"
#include "onshap/experiments.hpp"
#include "onshap/harness.hpp"
#include "test_support.hpp"

using namespace onshap;

namespace {

nlohmann::json small_two_feature() { return {{"n_points", 3000}, {"n_global_samples", 3000}}; }

}  // namespace

TEST_CASE("stage runner caches by key") {
  const auto dir = onshap::testing::temp_dir("stages");
  int calls = 0;
  auto compute = [&] {
    ++calls;
    return nlohmann::json{{"value", 1.5}};
  };
  {
    StageRunner stages(dir);
    CHECK(stages.run("fit", {{"a", 1}}, true, compute).at("value") == 1.5);
    CHECK(stages.run("fit", {{"a", 1}}, true, compute).at("value") == 1.5);
    CHECK(calls == 1);
    stages.run("fit", {{"a", 2}}, true, compute);
    CHECK(calls == 2);
    CHECK(stages.training_stages_computed() == 2);
    CHECK(stages.stages_cached() == 1);
  }
  StageRunner again(dir);
  again.run("fit", {{"a", 2}}, true, compute);
  CHECK(calls == 2);
  CHECK(again.training_stages_computed() == 0);
  StageRunner uncached(dir, false);
  uncached.run("fit", {{"a", 2}}, true, compute);
  CHECK(calls == 3);
}

TEST_CASE("artifacts are fingerprinted in the manifest") {
  const auto dir = onshap::testing::temp_dir("artifacts");
  StageRunner stages(dir);
  stages.write_artifact("x/out.csv", "a,b\n1,2\n", "csv");
  const nlohmann::json m = stages.manifest("demo", 4, {{"k", 1}});
  CHECK(m.at("seed") == 4);
  CHECK(m.at("artifacts").size() == 1);
  CHECK(m.at("artifacts")[0].at("sha256") == sha256_hex("a,b\n1,2\n"));
  CHECK(read_file(dir / "x/out.csv") == "a,b\n1,2\n");
}

TEST_CASE("recipe rerun trains nothing and reproduces its results") {
  const auto dir = onshap::testing::temp_dir("recipe");
  const nlohmann::json first = run_recipe("two_feature_globals", dir / "a", 5, small_two_feature());
  const std::string result = read_file(dir / "a" / "result.json");
  const nlohmann::json second = run_recipe("two_feature_globals", dir / "a", 5, small_two_feature());
  std::size_t trained = 0;
  for (const auto& s : second.at("stages")) trained += s.value("training", false) && !s.value("cached", false);
  CHECK(trained == 0);
  CHECK(read_file(dir / "a" / "result.json") == result);

  run_recipe("two_feature_globals", dir / "b", 5, small_two_feature(), false);
  CHECK(read_file(dir / "b" / "result.json") == result);
  CHECK(first.at("status") == "ok");
  CHECK(second.at("training_stages_computed") == 0);

  const auto written = write_report("fig4", dir / "a", dir / "report");
  CHECK(written.size() == 2);
  CHECK(read_file(written[1]).find("<svg") != std::string::npos);
  CHECK_THROWS_AS(write_report("table1", dir / "a", dir / "report"), DataError);
}

TEST_CASE("failed recipes leave a partial manifest") {
  const auto dir = onshap::testing::temp_dir("failure");
  CHECK_THROWS_AS(run_recipe("abalone_globals", dir, 0, nlohmann::json::object()), DataError);
  const nlohmann::json m = read_json(dir / "manifest.json");
  CHECK(m.at("status") == "failed");
  CHECK(m.at("failure").at("message").get<std::string>().find("abalone") != std::string::npos);
  CHECK_THROWS_AS(run_recipe("nope", dir, 0, nlohmann::json::object()), UsageError);
}

TEST_CASE("config documents round-trip") {
  const OutlierStudyConfig o;
  CHECK(OutlierStudyConfig::from_json(o.to_json(), o).to_json() == o.to_json());
  const DrugConfig d;
  CHECK(DrugConfig::from_json(d.to_json(), d).to_json() == d.to_json());
  const CensusConfig c;
  CHECK(CensusConfig::from_json(c.to_json(), c).to_json() == c.to_json());
  const MnistConfig m;
  CHECK(MnistConfig::from_json(m.to_json(), m).to_json() == m.to_json());
  const PipelineConfig p = PipelineConfig::defaults("mnist");
  CHECK(PipelineConfig::from_json(p.to_json(), PipelineConfig{}).to_json() == p.to_json());
  nlohmann::json patch = {{"pipeline", {{"mlp", {{"hidden", {7}}}}}}};
  CHECK(CensusConfig::from_json(patch, c).pipeline.mlp.hidden == std::vector<std::size_t>{7});
}
