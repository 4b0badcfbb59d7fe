#include "onshap/model_io.hpp"

#include "onshap/artifacts.hpp"
#include "onshap/dataset.hpp"
#include "onshap/isolation_forest.hpp"
#include "onshap/mlp.hpp"
#include "onshap/trees.hpp"

namespace onshap {

ModelPtr model_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "onshap-model") throw DataError("not an onshap model document");
  if (doc.value("version", 0) != 1) throw DataError("unsupported model document version");
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "mlp") return std::make_shared<MlpClassifier>(MlpClassifier::from_json(doc));
  if (kind == "decision_tree") return std::make_shared<DecisionTree>(DecisionTree::from_json(doc));
  if (kind == "random_forest") return std::make_shared<RandomForest>(RandomForest::from_json(doc));
  if (kind == "isolation_forest") {
    return std::make_shared<IsolationForest>(IsolationForest::from_json(doc));
  }
  throw DataError("unknown model kind '" + kind + "'");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, model.to_json().dump());
}

ModelPtr load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model file " + path.string() + ": " + e.what());
  }
}

std::string model_fingerprint(const Model& model) { return sha256_hex(model.to_json().dump()); }

}  // namespace onshap
