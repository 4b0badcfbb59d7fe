#include "onshap/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "onshap/artifacts.hpp"

namespace onshap {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::binary:
      return "binary";
    case FeatureKind::categorical:
      return "categorical";
    case FeatureKind::continuous:
      return "continuous";
  }
  return "continuous";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "binary") return FeatureKind::binary;
  if (name == "categorical") return FeatureKind::categorical;
  if (name == "continuous") return FeatureKind::continuous;
  throw DataError("unknown feature kind '" + std::string(name) + "'");
}

Split make_split(std::size_t n_rows, std::uint64_t seed, SplitFractions fractions) {
  const double total = fractions.train + fractions.validation + fractions.test;
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(total - 1.0) > 1e-9) {
    throw UsageError("split fractions must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x5b17);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n_rows));
  const auto n_val = std::min(n_rows - n_train,
                              static_cast<std::size_t>(std::llround(fractions.validation * n_rows)));
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  names.reserve(schema.size());
  for (const auto& column : schema) names.push_back(column.name);
  return names;
}

Matrix Dataset::rows(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

std::vector<int> Dataset::labels_of(std::span<const std::size_t> indices) const {
  if (!labels) throw DataError("dataset '" + name + "' has no labels");
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back((*labels)[i]);
  return out;
}

std::vector<double> Dataset::class_frequencies(std::span<const std::size_t> indices) const {
  if (!labels) throw DataError("dataset '" + name + "' has no labels");
  std::vector<double> freq(n_classes, 0.0);
  for (std::size_t i : indices) freq[static_cast<std::size_t>((*labels)[i])] += 1.0;
  if (!indices.empty()) {
    for (double& f : freq) f /= static_cast<double>(indices.size());
  }
  return freq;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string Dataset::fingerprint() const {
  std::string bytes;
  const std::uint64_t shape[2] = {n_rows(), n_features()};
  bytes.append(reinterpret_cast<const char*>(shape), sizeof(shape));
  bytes.append(reinterpret_cast<const char*>(features.data()),
               static_cast<std::size_t>(features.size()) * sizeof(double));
  if (labels) {
    bytes.append(reinterpret_cast<const char*>(labels->data()), labels->size() * sizeof(int));
  }
  for (const auto& column : schema) {
    bytes += column.name;
    bytes += '\x1f';
    bytes += to_string(column.kind);
    bytes += '\x1e';
  }
  return sha256_hex(bytes);
}

void check_sentinel_safety(const Dataset& data) {
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      const double v = data.features(r, c);
      if (v == kMaskSentinel || !std::isfinite(v)) {
        throw DataError("row " + std::to_string(r) + ", column " + std::to_string(c) +
                        " holds the mask sentinel or a non-finite value");
      }
      const auto& column = data.schema[static_cast<std::size_t>(c)];
      if (column.is_discrete() &&
          (v < 0 || v != std::floor(v) || v >= static_cast<double>(column.n_categories))) {
        throw DataError("row " + std::to_string(r) + ": discrete column '" + column.name +
                        "' holds a value outside its category codes");
      }
    }
  }
}

Matrix one_hot(std::span<const int> labels, std::size_t n_classes) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                            static_cast<Eigen::Index>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " out of range");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
  auto out = nlohmann::json::array();
  for (const auto& c : schema) {
    out.push_back({{"name", c.name},
                   {"kind", to_string(c.kind)},
                   {"n_categories", c.n_categories},
                   {"categories", c.categories},
                   {"source_min", c.source_min},
                   {"source_max", c.source_max}});
  }
  return out;
}

std::vector<ColumnSchema> schema_from_json(const nlohmann::json& doc) {
  std::vector<ColumnSchema> schema;
  for (const auto& c : doc) {
    ColumnSchema column;
    column.name = c.at("name").get<std::string>();
    column.kind = feature_kind_from_string(c.at("kind").get<std::string>());
    column.n_categories = c.value("n_categories", std::size_t{0});
    column.categories = c.value("categories", std::vector<std::string>{});
    column.source_min = c.value("source_min", 0.0);
    column.source_max = c.value("source_max", 1.0);
    schema.push_back(std::move(column));
  }
  return schema;
}

void save_dataset(const Dataset& data, const std::filesystem::path& manifest_path) {
  std::filesystem::path csv_path = manifest_path;
  csv_path.replace_extension(".csv");
  std::ostringstream csv;
  csv << std::setprecision(17);
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      if (c) csv << ',';
      csv << data.features(r, c);
    }
    if (data.labels) csv << ',' << (*data.labels)[static_cast<std::size_t>(r)];
    csv << '\n';
  }
  write_file_atomic(csv_path, csv.str());

  nlohmann::json manifest;
  manifest["format"] = "onshap-dataset";
  manifest["version"] = 1;
  manifest["name"] = data.name;
  manifest["data_file"] = csv_path.filename().string();
  manifest["n_rows"] = data.n_rows();
  manifest["n_features"] = data.n_features();
  manifest["labeled"] = data.labeled();
  manifest["n_classes"] = data.n_classes;
  manifest["schema"] = schema_to_json(data.schema);
  manifest["split"] = {{"seed", data.split_seed},
                       {"fractions",
                        {data.split_fractions.train, data.split_fractions.validation,
                         data.split_fractions.test}},
                       {"train", data.split.train.size()},
                       {"validation", data.split.validation.size()},
                       {"test", data.split.test.size()}};
  manifest["provenance"] = data.provenance;
  manifest["fingerprint"] = data.fingerprint();
  write_file_atomic(manifest_path, manifest.dump(2));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open dataset manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "onshap-dataset") {
    throw DataError(manifest_path.string() + " is not a dataset manifest");
  }
  Dataset data;
  data.name = manifest.at("name").get<std::string>();
  data.schema = schema_from_json(manifest.at("schema"));
  data.n_classes = manifest.at("n_classes").get<std::size_t>();
  data.provenance = manifest.value("provenance", nlohmann::json::object());
  const bool labeled = manifest.at("labeled").get<bool>();
  const auto n_rows = manifest.at("n_rows").get<std::size_t>();
  const auto n_features = manifest.at("n_features").get<std::size_t>();

  const auto csv_path = manifest_path.parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot open dataset file " + csv_path.string());
  data.features.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_features));
  std::vector<int> labels;
  std::string line;
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (row >= n_rows) throw DataError(csv_path.string() + ": more rows than the manifest declares");
    std::istringstream fields(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(fields, cell, ',')) {
      try {
        if (col < n_features) {
          data.features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
              std::stod(cell);
        } else if (labeled && col == n_features) {
          labels.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw DataError(csv_path.string() + ": row " + std::to_string(row) + " column " +
                        std::to_string(col) + " is not numeric");
      }
      ++col;
    }
    if (col != n_features + (labeled ? 1 : 0)) {
      throw DataError(csv_path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(col) + " fields");
    }
    ++row;
  }
  if (row != n_rows) throw DataError(csv_path.string() + ": fewer rows than the manifest declares");
  if (labeled) data.labels = std::move(labels);
  data.split_seed = manifest.at("split").at("seed").get<std::uint64_t>();
  const auto fractions = manifest.at("split").at("fractions").get<std::vector<double>>();
  if (fractions.size() != 3) throw DataError("split fractions must have three entries");
  data.split_fractions = {fractions[0], fractions[1], fractions[2]};
  data.split = make_split(n_rows, data.split_seed, data.split_fractions);
  if (manifest.contains("fingerprint") &&
      manifest["fingerprint"].get<std::string>() != data.fingerprint()) {
    throw DataError(csv_path.string() + " does not match the manifest fingerprint");
  }
  return data;
}

}  // namespace onshap
