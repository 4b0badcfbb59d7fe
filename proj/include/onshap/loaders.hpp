#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "onshap/dataset.hpp"

namespace onshap {

struct ColumnSpec {
  std::string name;
  std::size_t index = 0;  // position in the delimited row
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> zero_values;  // binary: these raw values map to 0, others to 1
};

enum class LabelRule {
  one_of,        // 1 if the raw value is in `values`
  binarize,      // 0 if the raw value is in `values`, else 1
  median_split,  // numeric; 1 if above the median
  categorical,   // integer codes of the sorted distinct values
};

struct LabelSpec {
  std::size_t index = 0;
  LabelRule rule = LabelRule::one_of;
  std::vector<std::string> values;
};

struct TabularSpec {
  std::string name;
  char delimiter = ',';
  bool header = false;
  std::vector<ColumnSpec> columns;
  std::optional<LabelSpec> label;  // absent => unlabeled dataset
  std::string source_hint;         // where to obtain the file

  static TabularSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Built-in layouts for the UCI files drug_consumption.data, abalone.data, adult.data.
  static TabularSpec preset(std::string_view name);
};

/// Parses the file, min-max scales continuous columns to [0, 1] and codes
/// categorical columns by sorted distinct value.
Dataset load_tabular(const std::filesystem::path& path, const TabularSpec& spec,
                     std::uint64_t split_seed = 0);

/// IDX image file (magic 2051) plus optional IDX label file (magic 2049).
/// Pixels are set to 1 when at least threshold * 255.
Dataset load_binary_mnist(const std::filesystem::path& images,
                          const std::optional<std::filesystem::path>& labels,
                          double threshold = 0.5, std::optional<std::size_t> limit = std::nullopt,
                          std::uint64_t split_seed = 0);

/// Writes IDX files (used for fixtures and round-trip tests).
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

}  // namespace onshap
