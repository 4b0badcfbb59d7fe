#pragma once

#include <filesystem>

#include "onshap/model.hpp"

namespace onshap {

/// Rebuilds a model of any built-in kind from its JSON document.
ModelPtr model_from_json(const nlohmann::json& doc);

void save_model(const Model& model, const std::filesystem::path& path);
ModelPtr load_model(const std::filesystem::path& path);

/// SHA-256 of the model's canonical JSON dump.
std::string model_fingerprint(const Model& model);

}  // namespace onshap
