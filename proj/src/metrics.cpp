#include "onshap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "onshap/coalition.hpp"

namespace onshap {

nlohmann::json MseReport::to_json() const {
  return {{"format", "onshap-mse"},
          {"version", 1},
          {"mse", mse},
          {"std_error", std_error},
          {"n_samples", n_samples},
          {"method_id", method_id},
          {"dataset_id", dataset_id}};
}

MseReport MseReport::from_json(const nlohmann::json& doc) {
  return {doc.at("mse").get<double>(), doc.at("std_error").get<double>(),
          doc.at("n_samples").get<std::size_t>(), doc.at("method_id").get<std::string>(),
          doc.at("dataset_id").get<std::string>()};
}

MseReport value_function_mse(const Model& model, const VfFactory& factory, const Matrix& points,
                             std::size_t n_samples, std::uint64_t seed) {
  if (points.rows() == 0) throw DataError("MSE needs at least one data point");
  if (n_samples == 0) throw UsageError("n_samples must be at least 1");
  const auto n = static_cast<std::size_t>(points.cols());
  const auto rows = static_cast<std::size_t>(points.rows());
  const std::size_t classes = model.n_outputs();
  std::vector<double> errors(n_samples);
  std::string id;
  parallel_for(n_samples, [&](std::size_t m) {
    Rng rng = make_rng(seed, m);
    const std::size_t row = std::uniform_int_distribution<std::size_t>(0, rows - 1)(rng);
    const Vector x = points.row(static_cast<Eigen::Index>(row)).transpose();
    const Coalition s = sample_shapley_coalition(n, rng);
    const Vector f = model.predict_row(x);
    double err = 0.0;
    for (std::size_t y = 0; y < classes; ++y) {
      const ValueFunctionPtr v = factory(x, static_cast<int>(y));
      if (m == 0 && y == 0) id = v->id();
      double value = 0.0, variance = 0.0;
      v->evaluate_batch_with_variance(std::span<const Coalition>(&s, 1), rng,
                                      std::span<double>(&value, 1), std::span<double>(&variance, 1));
      // Unbiased for |f - v|^2 with v the exact expectation.
      const double diff = f[static_cast<Eigen::Index>(y)] - value;
      err += diff * diff - variance;
    }
    errors[m] = err / static_cast<double>(classes);
  });
  RunningStats stats;
  for (double e : errors) stats.add(e);
  return {stats.mean(), n_samples > 1 ? stats.std_error() : 0.0, n_samples, id, ""};
}

MseReport aggregate_mse(std::span<const MseReport> runs) {
  if (runs.empty()) throw UsageError("no MSE runs to aggregate");
  if (runs.size() == 1) return runs.front();
  RunningStats stats;
  std::size_t samples = 0;
  for (const auto& r : runs) {
    stats.add(r.mse);
    samples += r.n_samples;
  }
  return {stats.mean(), stats.std_error(), samples, runs.front().method_id,
          runs.front().dataset_id};
}

std::string mse_table_csv(std::span<const MseReport> rows) {
  std::ostringstream out;
  out.precision(6);
  out << "dataset,method,mse,std_error\n";
  for (const auto& r : rows) {
    out << r.dataset_id << ',' << r.method_id << ',' << r.mse << ',' << r.std_error << '\n';
  }
  return out.str();
}

bool explanation_in_error(std::span<const double> values,
                          const std::vector<std::size_t>& ground_truth) {
  const std::size_t k = ground_truth.size();
  if (k == 0 || k > values.size()) throw UsageError("ground truth must name 1..n features");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  if (k < values.size() && values[order[k - 1]] == values[order[k]]) return true;
  std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> truth = ground_truth;
  std::sort(top.begin(), top.end());
  std::sort(truth.begin(), truth.end());
  return top != truth;
}

double explanation_error_rate(std::span<const Attribution> attributions,
                              const std::vector<std::size_t>& ground_truth) {
  if (attributions.empty()) throw UsageError("error rate needs at least one attribution");
  std::size_t errors = 0;
  for (const auto& a : attributions) errors += explanation_in_error(a.values, ground_truth);
  return static_cast<double>(errors) / static_cast<double>(attributions.size());
}

nlohmann::json Agreement::to_json() const {
  return {{"spearman_rho", spearman_rho},
          {"max_abs_diff", max_abs_diff},
          {"within_error_bars", within_error_bars}};
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("rank correlation needs equal lengths");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  if (ra == rb) return 1.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

Agreement attribution_agreement(const Attribution& a, const Attribution& b) {
  if (a.size() != b.size() || a.feature_names != b.feature_names) {
    throw ShapeError("attributions cover different features");
  }
  if (a.size() == 0) throw UsageError("empty attributions");
  Agreement out;
  out.spearman_rho = spearman(a.values, b.values);
  std::size_t within = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a.values[i] - b.values[i]);
    out.max_abs_diff = std::max(out.max_abs_diff, diff);
    const double se = std::hypot(a.std_errors[i], b.std_errors[i]);
    within += diff <= 3.0 * se;
  }
  out.within_error_bars = static_cast<double>(within) / static_cast<double>(a.size());
  return out;
}

double gini_coefficient(std::span<const double> values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) v.push_back(std::abs(x));
  std::sort(v.begin(), v.end());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (v.empty() || total == 0.0) return 0.0;
  const double n = static_cast<double>(v.size());
  double weighted = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    weighted += (2.0 * static_cast<double>(i + 1) - n - 1.0) * v[i];
  }
  return weighted / (n * total);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("KS distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace onshap
