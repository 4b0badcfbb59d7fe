#include "onshap/loaders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "onshap/artifacts.hpp"

namespace onshap {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delimiter)) fields.push_back(trim(field));
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string rule_name(LabelRule rule) {
  switch (rule) {
    case LabelRule::one_of:
      return "one_of";
    case LabelRule::binarize:
      return "binarize";
    case LabelRule::median_split:
      return "median_split";
    case LabelRule::categorical:
      return "categorical";
  }
  return "one_of";
}

LabelRule rule_from_name(const std::string& name) {
  if (name == "one_of") return LabelRule::one_of;
  if (name == "binarize") return LabelRule::binarize;
  if (name == "median_split") return LabelRule::median_split;
  if (name == "categorical") return LabelRule::categorical;
  throw DataError("unknown label rule '" + name + "'");
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

TabularSpec TabularSpec::from_json(const nlohmann::json& doc) {
  TabularSpec spec;
  spec.name = doc.value("name", std::string("tabular"));
  const std::string delim = doc.value("delimiter", std::string(","));
  if (delim.size() != 1) throw UsageError("delimiter must be a single character");
  spec.delimiter = delim[0];
  spec.header = doc.value("header", false);
  spec.source_hint = doc.value("source_hint", std::string());
  for (const auto& c : doc.at("columns")) {
    ColumnSpec col;
    col.name = c.at("name").get<std::string>();
    col.index = c.at("index").get<std::size_t>();
    col.kind = feature_kind_from_string(c.value("kind", std::string("continuous")));
    col.zero_values = c.value("zero_values", std::vector<std::string>{});
    spec.columns.push_back(std::move(col));
  }
  if (doc.contains("label") && !doc.at("label").is_null()) {
    const auto& l = doc.at("label");
    spec.label = LabelSpec{l.at("index").get<std::size_t>(),
                           rule_from_name(l.value("rule", std::string("one_of"))),
                           l.value("values", std::vector<std::string>{})};
  }
  return spec;
}

nlohmann::json TabularSpec::to_json() const {
  auto columns_json = nlohmann::json::array();
  for (const auto& c : columns) {
    columns_json.push_back({{"name", c.name},
                            {"index", c.index},
                            {"kind", to_string(c.kind)},
                            {"zero_values", c.zero_values}});
  }
  nlohmann::json doc = {{"name", name},
                        {"delimiter", std::string(1, delimiter)},
                        {"header", header},
                        {"columns", columns_json},
                        {"source_hint", source_hint}};
  doc["label"] = label ? nlohmann::json{{"index", label->index},
                                        {"rule", rule_name(label->rule)},
                                        {"values", label->values}}
                       : nlohmann::json(nullptr);
  return doc;
}

TabularSpec TabularSpec::preset(std::string_view name) {
  TabularSpec spec;
  spec.name = std::string(name);
  if (name == "drug") {
    // ID, 12 demographic/personality columns, then 19 usage columns CL0..CL6.
    static const std::map<std::string, std::size_t> kDrugColumns = {
        {"Amphetamines", 14}, {"Amyl", 15},    {"Benzodiazepines", 16}, {"Cannabis", 18},
        {"Cocaine", 20},      {"Crack", 21},   {"Ecstasy", 22},         {"Heroin", 23},
        {"Ketamine", 24},     {"Mushrooms", 28}};
    for (const auto& [col_name, index] : kDrugColumns) {
      spec.columns.push_back({col_name, index, FeatureKind::binary, {"CL0"}});
    }
    std::sort(spec.columns.begin(), spec.columns.end(),
              [](const ColumnSpec& a, const ColumnSpec& b) { return a.index < b.index; });
    spec.label = LabelSpec{26, LabelRule::binarize, {"CL0"}};
    spec.source_hint =
        "https://archive.ics.uci.edu/ml/machine-learning-databases/00373/drug_consumption.data";
  } else if (name == "abalone") {
    spec.columns = {{"Sex", 0, FeatureKind::categorical, {}},
                    {"Length", 1, FeatureKind::continuous, {}},
                    {"Diameter", 2, FeatureKind::continuous, {}},
                    {"Height", 3, FeatureKind::continuous, {}},
                    {"Whole weight", 4, FeatureKind::continuous, {}},
                    {"Shucked weight", 5, FeatureKind::continuous, {}},
                    {"Viscera weight", 6, FeatureKind::continuous, {}},
                    {"Shell weight", 7, FeatureKind::continuous, {}}};
    spec.label = LabelSpec{8, LabelRule::median_split, {}};
    spec.source_hint = "https://archive.ics.uci.edu/ml/machine-learning-databases/abalone/abalone.data";
  } else if (name == "census") {
    // adult.data without the sampling weight (fnlwgt).
    spec.columns = {{"age", 0, FeatureKind::continuous, {}},
                    {"workclass", 1, FeatureKind::categorical, {}},
                    {"education", 3, FeatureKind::categorical, {}},
                    {"education-num", 4, FeatureKind::continuous, {}},
                    {"marital-status", 5, FeatureKind::categorical, {}},
                    {"occupation", 6, FeatureKind::categorical, {}},
                    {"relationship", 7, FeatureKind::categorical, {}},
                    {"race", 8, FeatureKind::categorical, {}},
                    {"sex", 9, FeatureKind::binary, {"Female"}},
                    {"capital-gain", 10, FeatureKind::continuous, {}},
                    {"capital-loss", 11, FeatureKind::continuous, {}},
                    {"hours-per-week", 12, FeatureKind::continuous, {}},
                    {"native-country", 13, FeatureKind::categorical, {}}};
    spec.label = LabelSpec{14, LabelRule::one_of, {">50K", ">50K."}};
    spec.source_hint = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data";
  } else {
    throw UsageError("unknown dataset preset '" + std::string(name) +
                     "' (expected drug, abalone or census)");
  }
  return spec;
}

Dataset load_tabular(const std::filesystem::path& path, const TabularSpec& spec,
                     std::uint64_t split_seed) {
  if (!std::filesystem::exists(path)) {
    std::string msg = "data file " + path.string() + " not found";
    if (!spec.source_hint.empty()) msg += "; download it from " + spec.source_hint;
    throw DataError(msg);
  }
  if (spec.columns.empty()) throw UsageError("tabular spec declares no columns");
  std::ifstream in(path);
  std::string line;
  std::vector<std::vector<std::string>> raw;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 0;
  std::size_t width = 0;
  for (const auto& c : spec.columns) width = std::max(width, c.index + 1);
  if (spec.label) width = std::max(width, spec.label->index + 1);
  while (std::getline(in, line)) {
    ++line_no;
    if (spec.header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    auto fields = split_line(line, spec.delimiter);
    if (fields.size() < width) {
      throw DataError(path.string() + " row " + std::to_string(line_no) + ": expected at least " +
                      std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    raw.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (raw.empty()) throw DataError(path.string() + " contains no data rows");

  Dataset data;
  data.name = spec.name;
  const auto n_rows = static_cast<Eigen::Index>(raw.size());
  data.features.resize(n_rows, static_cast<Eigen::Index>(spec.columns.size()));
  for (std::size_t j = 0; j < spec.columns.size(); ++j) {
    const ColumnSpec& cs = spec.columns[j];
    ColumnSchema col;
    col.name = cs.name;
    col.kind = cs.kind;
    const auto cj = static_cast<Eigen::Index>(j);
    if (cs.kind == FeatureKind::continuous) {
      for (Eigen::Index r = 0; r < n_rows; ++r) {
        const auto& value = raw[static_cast<std::size_t>(r)][cs.index];
        const auto v = parse_number(value);
        if (!v) {
          throw DataError(path.string() + " row " + std::to_string(line_numbers[static_cast<std::size_t>(r)]) +
                          ": column '" + cs.name + "' value '" + value + "' is not numeric");
        }
        data.features(r, cj) = *v;
      }
      col.source_min = data.features.col(cj).minCoeff();
      col.source_max = data.features.col(cj).maxCoeff();
      const double span = col.source_max - col.source_min;
      if (span > 0.0) {
        data.features.col(cj) = ((data.features.col(cj).array() - col.source_min) / span).matrix();
      } else {
        data.features.col(cj).setZero();
      }
    } else if (cs.kind == FeatureKind::binary && !cs.zero_values.empty()) {
      const std::set<std::string> zeros(cs.zero_values.begin(), cs.zero_values.end());
      for (Eigen::Index r = 0; r < n_rows; ++r) {
        data.features(r, cj) = zeros.count(raw[static_cast<std::size_t>(r)][cs.index]) ? 0.0 : 1.0;
      }
      col.n_categories = 2;
      col.categories = {"in {" + cs.zero_values.front() + (cs.zero_values.size() > 1 ? ",...}" : "}"),
                        "other"};
    } else {
      std::set<std::string> distinct;
      for (const auto& row : raw) distinct.insert(row[cs.index]);
      if (cs.kind == FeatureKind::binary && distinct.size() > 2) {
        throw DataError("column '" + cs.name + "' declared binary but has " +
                        std::to_string(distinct.size()) + " distinct values");
      }
      col.categories.assign(distinct.begin(), distinct.end());
      col.n_categories = cs.kind == FeatureKind::binary ? 2 : col.categories.size();
      std::map<std::string, double> code;
      for (std::size_t k = 0; k < col.categories.size(); ++k) code[col.categories[k]] = static_cast<double>(k);
      for (Eigen::Index r = 0; r < n_rows; ++r) {
        data.features(r, cj) = code.at(raw[static_cast<std::size_t>(r)][cs.index]);
      }
    }
    data.schema.push_back(std::move(col));
  }

  if (spec.label) {
    const LabelSpec& ls = *spec.label;
    std::vector<int> labels(raw.size());
    const std::set<std::string> values(ls.values.begin(), ls.values.end());
    bool any_label = false;
    for (const auto& row : raw) any_label |= !row[ls.index].empty();
    if (any_label) {
      switch (ls.rule) {
        case LabelRule::one_of:
          for (std::size_t r = 0; r < raw.size(); ++r) labels[r] = values.count(raw[r][ls.index]) ? 1 : 0;
          data.n_classes = 2;
          break;
        case LabelRule::binarize:
          for (std::size_t r = 0; r < raw.size(); ++r) labels[r] = values.count(raw[r][ls.index]) ? 0 : 1;
          data.n_classes = 2;
          break;
        case LabelRule::median_split: {
          std::vector<double> numbers(raw.size());
          for (std::size_t r = 0; r < raw.size(); ++r) {
            const auto v = parse_number(raw[r][ls.index]);
            if (!v) {
              throw DataError(path.string() + " row " + std::to_string(line_numbers[r]) +
                              ": label value '" + raw[r][ls.index] + "' is not numeric");
            }
            numbers[r] = *v;
          }
          std::vector<double> sorted = numbers;
          std::sort(sorted.begin(), sorted.end());
          const std::size_t m = sorted.size();
          const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
          for (std::size_t r = 0; r < raw.size(); ++r) labels[r] = numbers[r] > median ? 1 : 0;
          data.n_classes = 2;
          data.provenance["label_median"] = median;
          break;
        }
        case LabelRule::categorical: {
          std::set<std::string> distinct;
          for (const auto& row : raw) distinct.insert(row[ls.index]);
          std::map<std::string, int> code;
          int k = 0;
          for (const auto& v : distinct) code[v] = k++;
          for (std::size_t r = 0; r < raw.size(); ++r) labels[r] = code[raw[r][ls.index]];
          data.n_classes = distinct.size();
          break;
        }
      }
      data.labels = std::move(labels);
    }
  }
  data.provenance["source"] = path.string();
  data.provenance["source_sha256"] = sha256_hex(read_file(path));
  data.provenance["spec"] = spec.to_json();
  data.split_seed = split_seed;
  data.split = make_split(data.n_rows(), split_seed, data.split_fractions);
  check_sentinel_safety(data);
  return data;
}

Dataset load_binary_mnist(const std::filesystem::path& images,
                          const std::optional<std::filesystem::path>& labels, double threshold,
                          std::optional<std::size_t> limit, std::uint64_t split_seed) {
  std::ifstream in(images, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + images.string() +
                    "; MNIST IDX files are available from http://yann.lecun.com/exdb/mnist/ "
                    "(decompress the .gz files first)");
  }
  if (read_be32(in, images) != 2051) throw DataError(images.string() + ": bad IDX image magic number");
  const std::size_t count = read_be32(in, images);
  const std::size_t rows = read_be32(in, images);
  const std::size_t cols = read_be32(in, images);
  if (rows == 0 || cols == 0 || rows * cols > (1u << 20)) {
    throw DataError(images.string() + ": implausible image dimensions");
  }
  const std::size_t n = limit ? std::min(*limit, count) : count;
  const std::size_t pixels = rows * cols;
  std::vector<unsigned char> buffer(n * pixels);
  if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
    throw DataError(images.string() + ": file shorter than its header declares");
  }
  Dataset data;
  data.name = "binary_mnist";
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  const double cut = threshold * 255.0;
  for (std::size_t i = 0; i < n * pixels; ++i) {
    data.features.data()[i] = static_cast<double>(buffer[i]) >= cut ? 1.0 : 0.0;
  }
  for (std::size_t p = 0; p < pixels; ++p) {
    ColumnSchema c;
    c.name = "px" + std::to_string(p / cols) + "_" + std::to_string(p % cols);
    c.kind = FeatureKind::binary;
    c.n_categories = 2;
    data.schema.push_back(std::move(c));
  }
  if (labels) {
    std::ifstream lin(*labels, std::ios::binary);
    if (!lin) throw DataError("cannot open " + labels->string());
    if (read_be32(lin, *labels) != 2049) throw DataError(labels->string() + ": bad IDX label magic number");
    const std::size_t label_count = read_be32(lin, *labels);
    if (label_count != count) throw DataError("image and label files disagree on the number of items");
    std::vector<unsigned char> raw(n);
    if (!lin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n))) {
      throw DataError(labels->string() + ": file shorter than its header declares");
    }
    std::vector<int> y(raw.begin(), raw.end());
    data.n_classes = static_cast<std::size_t>(*std::max_element(y.begin(), y.end())) + 1;
    data.n_classes = std::max<std::size_t>(data.n_classes, 10);
    data.labels = std::move(y);
  }
  data.provenance = {{"source", images.string()},
                     {"image_rows", rows},
                     {"image_cols", cols},
                     {"threshold", threshold}};
  data.split_seed = split_seed;
  data.split = make_split(data.n_rows(), split_seed, data.split_fractions);
  return data;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() % (rows * cols) != 0) throw UsageError("pixel count is not a multiple of the image size");
  std::ostringstream out;
  write_be32(out, 2051);
  write_be32(out, static_cast<std::uint32_t>(pixels.size() / (rows * cols)));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  write_file_atomic(path, out.str());
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ostringstream out;
  write_be32(out, 2049);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  write_file_atomic(path, out.str());
}

}  // namespace onshap
