#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "json.hpp"

#include "onshap/common.hpp"

namespace onshap {

enum class OutputKind {
  probability,  // rows are points of the probability simplex
  score,        // unconstrained real outputs (e.g. raw anomaly score)
};

/// The model to explain: f_y(x) for every output slot y.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t n_features() const = 0;
  virtual std::size_t n_outputs() const = 0;
  virtual OutputKind output_kind() const { return OutputKind::probability; }

  /// Validates the input width and evaluates every row.
  Matrix predict(const Matrix& batch) const;
  Vector predict_row(const Vector& x) const;

  virtual nlohmann::json to_json() const = 0;

 protected:
  virtual Matrix predict_unchecked(const Matrix& batch) const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

}  // namespace onshap
