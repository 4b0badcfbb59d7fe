#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "onshap/common.hpp"

namespace onshap {

enum class FeatureKind { binary, categorical, continuous };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

struct ColumnSchema {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::size_t n_categories = 0;         // binary: 2, categorical: k, continuous: 0
  std::vector<std::string> categories;  // category labels in code order, if known
  double source_min = 0.0;              // range before min-max scaling
  double source_max = 1.0;

  bool is_discrete() const { return kind != FeatureKind::continuous; }
};

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Disjoint random split covering every row; reproducible for a given seed.
Split make_split(std::size_t n_rows, std::uint64_t seed, SplitFractions fractions = {});

struct Dataset {
  std::string name;
  Matrix features;
  std::vector<ColumnSchema> schema;
  std::optional<std::vector<int>> labels;
  std::size_t n_classes = 0;
  Split split;
  std::uint64_t split_seed = 0;
  SplitFractions split_fractions;
  nlohmann::json provenance = nlohmann::json::object();  // source, label rule, generator config

  std::size_t n_rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
  bool labeled() const { return labels.has_value(); }
  std::vector<std::string> feature_names() const;

  Matrix rows(std::span<const std::size_t> indices) const;
  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
  std::vector<double> class_frequencies(std::span<const std::size_t> indices) const;

  /// SHA-256 over shape, feature bytes, labels and schema (hex).
  std::string fingerprint() const;
};

nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema);
std::vector<ColumnSchema> schema_from_json(const nlohmann::json& doc);

/// Throws DataError if any feature equals the mask sentinel or a discrete
/// column holds a negative or non-integer value.
void check_sentinel_safety(const Dataset& data);

/// One-hot targets for integer labels.
Matrix one_hot(std::span<const int> labels, std::size_t n_classes);

std::string sha256_hex(std::string_view bytes);

/// Dataset manifest (JSON) plus a CSV data file next to it. Values are written
/// with 17 significant digits.
void save_dataset(const Dataset& data, const std::filesystem::path& manifest_path);
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace onshap
