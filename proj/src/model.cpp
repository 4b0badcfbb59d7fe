#include "onshap/model.hpp"

namespace onshap {

Matrix Model::predict(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != n_features()) {
    throw ShapeError(kind() + " model expects " + std::to_string(n_features()) +
                     " features, got " + std::to_string(batch.cols()));
  }
  return predict_unchecked(batch);
}

Vector Model::predict_row(const Vector& x) const {
  return predict(x.transpose()).row(0).transpose();
}

}  // namespace onshap
