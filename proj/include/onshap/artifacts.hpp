#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace onshap {

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace onshap
