#include "onshap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace onshap {
namespace {

constexpr std::size_t kChunk = 64;

// Marginals of one permutation: out[i] = v(pred(i) + i) - v(pred(i)).
// Returns (v(N), v(empty)) as evaluated along the chain.
std::pair<double, double> permutation_marginals(const ValueFunction& v,
                                                const std::vector<std::size_t>& order, Rng& rng,
                                                std::span<double> out, SizeProfile* profile) {
  const std::size_t n = order.size();
  std::vector<Coalition> chain;
  chain.reserve(n + 1);
  Coalition s(n);
  chain.push_back(s);
  for (std::size_t k = 0; k < n; ++k) {
    s.insert(order[k]);
    chain.push_back(s);
  }
  std::vector<double> values(n + 1);
  v.evaluate_batch(chain, rng, values);
  for (std::size_t k = 0; k < n; ++k) {
    const double m = values[k + 1] - values[k];
    out[order[k]] = m;
    if (profile) profile->add(k, m);
  }
  return {values[n], values[0]};
}

struct SampleResult {
  std::vector<double> marginals;
  double full = 0.0;
  double empty = 0.0;
  SizeProfile profile;
};

// Runs sample(k, result) for k in [0, n_samples) in parallel chunks and hands
// the results to consume() in index order.
template <typename Sample, typename Consume>
void run_samples(std::size_t n_samples, std::size_t n_features, bool with_profile,
                 const Sample& sample, const Consume& consume) {
  std::vector<SampleResult> buffer(std::min(n_samples, kChunk * std::max<std::size_t>(1, default_threads())));
  for (std::size_t start = 0; start < n_samples; start += buffer.size()) {
    const std::size_t count = std::min(buffer.size(), n_samples - start);
    parallel_for(count, [&](std::size_t j) {
      SampleResult& r = buffer[j];
      r.marginals.assign(n_features, 0.0);
      r.profile = SizeProfile(with_profile ? n_features : 0);
      sample(start + j, r);
    });
    for (std::size_t j = 0; j < count; ++j) consume(buffer[j]);
  }
}

Attribution summarise(std::vector<RunningStats>& stats, RunningStats& full, RunningStats& empty,
                      RunningStats& sums, std::size_t n_samples, std::string id,
                      std::uint64_t seed, AttributionScope scope) {
  Attribution a;
  a.scope = scope;
  a.feature_names = default_feature_names(stats.size());
  for (const auto& s : stats) {
    a.values.push_back(s.mean());
    a.std_errors.push_back(s.count() > 1 ? s.std_error() : 0.0);
  }
  a.n_samples = n_samples;
  a.value_function_id = std::move(id);
  a.seed = seed;
  a.value_full = full.mean();
  a.value_empty = empty.mean();
  a.sum_std_error = sums.count() > 1 ? sums.std_error() : 0.0;
  a.sum_rule_residual = a.total() - (a.value_full - a.value_empty);
  return a;
}

std::vector<double> totals(const std::vector<CompensatedSum>& sums) {
  std::vector<double> out;
  out.reserve(sums.size());
  for (const auto& s : sums) out.push_back(s.value());
  return out;
}

}  // namespace

SizeProfile::SizeProfile(std::size_t n_features)
    : n_(n_features),
      counts_(n_features, 0),
      sums_(n_features),
      square_sums_(n_features),
      abs_sums_(n_features) {}

void SizeProfile::add(std::size_t coalition_size, double marginal) {
  ++counts_[coalition_size];
  sums_[coalition_size].add(marginal);
  square_sums_[coalition_size].add(marginal * marginal);
  abs_sums_[coalition_size].add(std::abs(marginal));
}

void SizeProfile::merge(const SizeProfile& other) {
  if (other.n_ == 0) return;
  if (other.n_ != n_) throw UsageError("size profiles differ in feature count");
  for (std::size_t k = 0; k < n_; ++k) {
    counts_[k] += other.counts_[k];
    sums_[k].add(other.sums_[k].value());
    square_sums_[k].add(other.square_sums_[k].value());
    abs_sums_[k].add(other.abs_sums_[k].value());
  }
}

std::vector<double> SizeProfile::mean() const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t k = 0; k < n_; ++k) {
    if (counts_[k]) out[k] = sums_[k].value() / static_cast<double>(counts_[k]);
  }
  return out;
}

std::vector<double> SizeProfile::mean_abs() const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t k = 0; k < n_; ++k) {
    if (counts_[k]) out[k] = abs_sums_[k].value() / static_cast<double>(counts_[k]);
  }
  return out;
}

std::vector<double> SizeProfile::std_error() const {
  std::vector<double> out(n_, 0.0);
  for (std::size_t k = 0; k < n_; ++k) {
    const double c = static_cast<double>(counts_[k]);
    if (counts_[k] < 2) continue;
    const double mean = sums_[k].value() / c;
    const double var = std::max(0.0, (square_sums_[k].value() - c * mean * mean) / (c - 1.0));
    out[k] = std::sqrt(var / c);
  }
  return out;
}

double SizeProfile::small_coalition_mass() const {
  // Signed means telescope, so the curve splits v(N) - v(empty) across sizes.
  const std::vector<double> curve = mean();
  double small = 0.0, total = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    total += curve[k];
    if (2 * k < n_) small += curve[k];
  }
  return total > 0.0 ? small / total : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json SizeProfile::to_json() const {
  return {{"n_features", n_},
          {"mean", mean()},
          {"mean_abs", mean_abs()},
          {"std_error", std_error()},
          {"counts", counts_},
          {"small_coalition_mass", std::isnan(small_coalition_mass()) ? nlohmann::json(nullptr)
                                                                       : nlohmann::json(small_coalition_mass())},
          {"sums", totals(sums_)},
          {"square_sums", totals(square_sums_)},
          {"abs_sums", totals(abs_sums_)}};
}

SizeProfile SizeProfile::from_json(const nlohmann::json& doc) {
  SizeProfile p(doc.at("n_features").get<std::size_t>());
  const auto counts = doc.at("counts").get<std::vector<std::size_t>>();
  const auto sums = doc.at("sums").get<std::vector<double>>();
  const auto squares = doc.at("square_sums").get<std::vector<double>>();
  const auto abs_sums = doc.at("abs_sums").get<std::vector<double>>();
  if (counts.size() != p.n_ || sums.size() != p.n_ || squares.size() != p.n_ ||
      abs_sums.size() != p.n_) {
    throw DataError("size profile arrays do not match n_features");
  }
  for (std::size_t k = 0; k < p.n_; ++k) {
    p.counts_[k] = counts[k];
    p.sums_[k].add(sums[k]);
    p.square_sums_[k].add(squares[k]);
    p.abs_sums_[k].add(abs_sums[k]);
  }
  return p;
}

Attribution shapley_exact(const ValueFunction& v, std::uint64_t seed) {
  const std::size_t n = v.n_features();
  if (n > kMaxExactFeatures) {
    throw UsageError("exact Shapley values need 2^" + std::to_string(n) +
                     " evaluations; use the Monte Carlo estimator (shapley_mc) for more than " +
                     std::to_string(kMaxExactFeatures) + " features");
  }
  const std::size_t total = std::size_t{1} << n;
  std::vector<double> values(total);
  Rng rng(derive_seed(seed, 0));
  constexpr std::size_t kBatch = 4096;
  std::vector<Coalition> batch;
  for (std::size_t start = 0; start < total; start += kBatch) {
    const std::size_t count = std::min(kBatch, total - start);
    batch.clear();
    for (std::size_t b = 0; b < count; ++b) batch.push_back(Coalition::from_bits(n, start + b));
    v.evaluate_batch(batch, rng, std::span<double>(values.data() + start, count));
  }
  // w(k) = k! (n-k-1)! / n!
  std::vector<double> weight(n, 0.0);
  if (n > 0) weight[0] = 1.0 / static_cast<double>(n);
  for (std::size_t k = 1; k < n; ++k) {
    weight[k] = weight[k - 1] * static_cast<double>(k) / static_cast<double>(n - k);
  }
  Attribution a;
  a.feature_names = default_feature_names(n);
  a.exact = true;
  a.value_function_id = v.id();
  a.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    CompensatedSum phi;
    for (std::size_t s = 0; s < total; ++s) {
      if (s & bit) continue;
      phi.add(weight[static_cast<std::size_t>(std::popcount(s))] * (values[s | bit] - values[s]));
    }
    a.values.push_back(phi.value());
    a.std_errors.push_back(0.0);
  }
  a.value_full = values[total - 1];
  a.value_empty = values[0];
  a.sum_rule_residual = a.total() - (a.value_full - a.value_empty);
  return a;
}

Attribution shapley_mc(const ValueFunction& v, const McOptions& options) {
  if (options.n_samples == 0) throw UsageError("n_samples must be at least 1");
  const std::size_t n = v.n_features();
  const std::size_t draws = options.antithetic ? (options.n_samples + 1) / 2 : options.n_samples;
  std::vector<RunningStats> stats(n);
  RunningStats full, empty, sums;
  const bool with_profile = options.profile != nullptr;
  run_samples(
      draws, n, with_profile,
      [&](std::size_t k, SampleResult& r) {
        Rng rng = make_rng(options.seed, k);
        const std::vector<std::size_t> order = random_permutation(n, rng);
        SizeProfile* profile = with_profile ? &r.profile : nullptr;
        std::tie(r.full, r.empty) = permutation_marginals(v, order, rng, r.marginals, profile);
        if (options.antithetic) {
          const std::vector<std::size_t> reversed(order.rbegin(), order.rend());
          std::vector<double> second(n);
          const auto [f2, e2] = permutation_marginals(v, reversed, rng, second, profile);
          for (std::size_t i = 0; i < n; ++i) r.marginals[i] = 0.5 * (r.marginals[i] + second[i]);
          r.full = 0.5 * (r.full + f2);
          r.empty = 0.5 * (r.empty + e2);
        }
      },
      [&](const SampleResult& r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          stats[i].add(r.marginals[i]);
          sum += r.marginals[i];
        }
        full.add(r.full);
        empty.add(r.empty);
        sums.add(sum);
        if (with_profile) options.profile->merge(r.profile);
      });
  return summarise(stats, full, empty, sums, options.antithetic ? 2 * draws : draws, v.id(),
                   options.seed, AttributionScope::local);
}

Attribution shapley_global(const Matrix& points, std::span<const int> labels,
                           const VfFactory& factory, std::size_t n_samples, std::uint64_t seed,
                           SizeProfile* profile) {
  if (points.rows() == 0) throw DataError("global Shapley values need at least one data point");
  if (labels.size() != static_cast<std::size_t>(points.rows())) {
    throw ShapeError("labels and points differ in length");
  }
  if (n_samples == 0) throw UsageError("n_samples must be at least 1");
  const auto n = static_cast<std::size_t>(points.cols());
  const std::size_t rows = static_cast<std::size_t>(points.rows());
  std::vector<RunningStats> stats(n);
  RunningStats full, empty, sums;
  std::string id;
  run_samples(
      n_samples, n, profile != nullptr,
      [&](std::size_t k, SampleResult& r) {
        Rng rng = make_rng(seed, k);
        const std::size_t row = std::uniform_int_distribution<std::size_t>(0, rows - 1)(rng);
        const Vector x = points.row(static_cast<Eigen::Index>(row)).transpose();
        const ValueFunctionPtr v = factory(x, labels[row]);
        const std::vector<std::size_t> order = random_permutation(n, rng);
        std::tie(r.full, r.empty) =
            permutation_marginals(*v, order, rng, r.marginals, profile ? &r.profile : nullptr);
        if (k == 0) id = v->id();
      },
      [&](const SampleResult& r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          stats[i].add(r.marginals[i]);
          sum += r.marginals[i];
        }
        full.add(r.full);
        empty.add(r.empty);
        sums.add(sum);
        if (profile) profile->merge(r.profile);
      });
  return summarise(stats, full, empty, sums, n_samples, id, seed, AttributionScope::global);
}

bool SumRuleReport::within(double n_std_errors, double abs_tol) const {
  return std::abs(residual) <= n_std_errors * std_error + abs_tol;
}

SumRuleReport sum_rule_check(const Attribution& a, const ValueFunction& v, std::size_t n_eval,
                             std::uint64_t seed) {
  if (a.size() != v.n_features()) throw ShapeError("attribution and value function differ in n");
  const std::size_t n = v.n_features();
  n_eval = std::max<std::size_t>(1, n_eval);
  const std::vector<Coalition> ends(n_eval, Coalition::full(n));
  const std::vector<Coalition> starts(n_eval, Coalition(n));
  std::vector<double> vf(n_eval), ve(n_eval);
  Rng rng(derive_seed(seed, 0x5u));
  v.evaluate_batch(ends, rng, vf);
  v.evaluate_batch(starts, rng, ve);
  RunningStats full, empty;
  for (std::size_t k = 0; k < n_eval; ++k) {
    full.add(vf[k]);
    empty.add(ve[k]);
  }
  SumRuleReport report;
  report.observed = a.total();
  report.expected = full.mean() - empty.mean();
  report.residual = report.observed - report.expected;
  const double se_full = n_eval > 1 ? full.std_error() : 0.0;
  const double se_empty = n_eval > 1 ? empty.std_error() : 0.0;
  report.std_error =
      std::sqrt(a.sum_std_error * a.sum_std_error + se_full * se_full + se_empty * se_empty);
  return report;
}

SumRuleReport global_sum_rule_check(const Attribution& a, const Model& model,
                                    const Matrix& points, std::span<const int> labels) {
  if (points.rows() == 0) throw DataError("global sum rule needs data");
  const Matrix out = model.predict(points);
  const auto rows = static_cast<std::size_t>(points.rows());
  std::vector<double> class_freq(static_cast<std::size_t>(out.cols()), 0.0);
  CompensatedSum joint;
  for (std::size_t r = 0; r < rows; ++r) {
    joint.add(out(static_cast<Eigen::Index>(r), labels[r]));
    class_freq[static_cast<std::size_t>(labels[r])] += 1.0 / static_cast<double>(rows);
  }
  CompensatedSum product;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < class_freq.size(); ++c) {
      product.add(class_freq[c] * out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
  }
  SumRuleReport report;
  report.observed = a.total();
  report.expected = (joint.value() - product.value()) / static_cast<double>(rows);
  report.residual = report.observed - report.expected;
  report.std_error = a.sum_std_error;
  return report;
}

SizeProfile summand_by_coalition_size(const Matrix& points, std::span<const int> classes,
                                      const VfFactory& factory, std::size_t n_samples,
                                      std::uint64_t seed) {
  SizeProfile profile(static_cast<std::size_t>(points.cols()));
  shapley_global(points, classes, factory, n_samples, seed, &profile);
  return profile;
}

}  // namespace onshap
