#include "onshap/value_functions.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "onshap/artifacts.hpp"

namespace onshap {
namespace {

void check_width(const Vector& x, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(x.size()) != n) {
    throw ShapeError(std::string(what) + " expects " + std::to_string(n) + " features, got " +
                     std::to_string(x.size()));
  }
}

void check_class(int y, std::size_t n_outputs) {
  if (y < 0 || static_cast<std::size_t>(y) >= n_outputs) {
    throw UsageError("class " + std::to_string(y) + " outside the model's " +
                     std::to_string(n_outputs) + " outputs");
  }
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// Block means of `column` and the estimated variance of each mean.
void inner_means(const Vector& column, std::size_t inner, bool exact, std::span<double> out,
                 std::span<double> variance) {
  const auto m = static_cast<Eigen::Index>(inner);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto block = column.segment(static_cast<Eigen::Index>(k) * m, m);
    out[k] = block.mean();
    variance[k] = !exact && inner > 1
                      ? (block.array() - out[k]).square().sum() /
                            static_cast<double>((inner - 1) * inner)
                      : 0.0;
  }
}

}  // namespace

std::string to_string(VfMethod method) {
  switch (method) {
    case VfMethod::off_manifold:
      return "off_manifold";
    case VfMethod::empirical_conditional:
      return "empirical_conditional";
    case VfMethod::generative:
      return "generative";
    case VfMethod::surrogate:
      return "surrogate";
    case VfMethod::retraining:
      return "retraining";
  }
  return "unknown";
}

VfMethod vf_method_from_string(std::string_view name) {
  if (name == "off" || name == "off_manifold") return VfMethod::off_manifold;
  if (name == "empirical" || name == "empirical_conditional") return VfMethod::empirical_conditional;
  if (name == "generative" || name == "unsupervised") return VfMethod::generative;
  if (name == "surrogate" || name == "supervised") return VfMethod::surrogate;
  if (name == "retraining") return VfMethod::retraining;
  throw UsageError("unknown value function method '" + std::string(name) +
                   "' (expected off, empirical, generative, surrogate or retraining)");
}

OffManifoldVf::OffManifoldVf(ModelPtr model, std::shared_ptr<const Matrix> background, Vector x,
                             int y, std::size_t n_inner, bool exhaustive)
    : model_(std::move(model)),
      background_(std::move(background)),
      x_(std::move(x)),
      y_(y),
      n_inner_(n_inner),
      exhaustive_(exhaustive) {
  if (!background_ || background_->rows() == 0) throw DataError("background data is empty");
  check_width(x_, model_->n_features(), "off-manifold value function");
  if (static_cast<std::size_t>(background_->cols()) != model_->n_features()) {
    throw ShapeError("background width does not match the model");
  }
  check_class(y_, model_->n_outputs());
  if (n_inner_ == 0) throw UsageError("n_inner_samples must be at least 1");
}

void OffManifoldVf::evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                                   std::span<double> out) const {
  std::vector<double> variance(coalitions.size());
  evaluate_batch_with_variance(coalitions, rng, out, variance);
}

void OffManifoldVf::evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                                 std::span<double> out,
                                                 std::span<double> variance) const {
  const Matrix& bg = *background_;
  const auto rows = static_cast<std::size_t>(bg.rows());
  const std::size_t inner = exhaustive_ ? rows : n_inner_;
  const auto n = x_.size();
  Matrix batch(static_cast<Eigen::Index>(coalitions.size() * inner), n);
  std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
  for (std::size_t k = 0; k < coalitions.size(); ++k) {
    const Coalition& s = coalitions[k];
    for (std::size_t t = 0; t < inner; ++t) {
      const auto src = static_cast<Eigen::Index>(exhaustive_ ? t : pick(rng));
      auto row = batch.row(static_cast<Eigen::Index>(k * inner + t));
      for (Eigen::Index i = 0; i < n; ++i) {
        row[i] = s.contains(static_cast<std::size_t>(i)) ? x_[i] : bg(src, i);
      }
    }
  }
  const Matrix pred = model_->predict(batch);
  // Exhaustive averages are exact expectations over the background.
  inner_means(pred.col(y_), inner, exhaustive_, out, variance);
}

EmpiricalConditionalContext::EmpiricalConditionalContext(ModelPtr model, Matrix background)
    : background_(std::move(background)) {
  if (background_.rows() == 0) throw DataError("background data is empty");
  predictions_ = model->predict(background_);
  packed_ = background_.cols() <= 64 &&
            (background_.array() == 0.0 || background_.array() == 1.0).all();
  if (packed_) {
    codes_.resize(static_cast<std::size_t>(background_.rows()));
    for (Eigen::Index r = 0; r < background_.rows(); ++r) {
      std::uint64_t code = 0;
      for (Eigen::Index c = 0; c < background_.cols(); ++c) {
        if (background_(r, c) == 1.0) code |= std::uint64_t{1} << c;
      }
      codes_[static_cast<std::size_t>(r)] = code;
    }
  }
}

double EmpiricalConditionalContext::conditional_mean(const Vector& x, const Coalition& s,
                                                     int y) const {
  const auto rows = background_.rows();
  const auto n = background_.cols();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double sum = 0.0;
  std::size_t count = 0;
  auto consider = [&](Eigen::Index r, std::size_t distance) {
    if (distance < best) {
      best = distance;
      sum = 0.0;
      count = 0;
    }
    if (distance == best) {
      sum += predictions_(r, y);
      ++count;
    }
  };
  bool packable = packed_;
  std::uint64_t xcode = 0;
  if (packable) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (x[c] == 1.0) {
        xcode |= std::uint64_t{1} << c;
      } else if (x[c] != 0.0) {
        packable = false;
        break;
      }
    }
  }
  if (packable) {
    const std::uint64_t mask = s.low_bits();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto d = static_cast<std::size_t>(
          std::popcount((codes_[static_cast<std::size_t>(r)] ^ xcode) & mask));
      consider(r, d);
    }
  } else {
    const std::vector<std::size_t> members = s.members();
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::size_t d = 0;
      for (std::size_t i : members) {
        d += background_(r, static_cast<Eigen::Index>(i)) != x[static_cast<Eigen::Index>(i)];
      }
      consider(r, d);
    }
  }
  if (best > 0) {
    if (fallbacks_.fetch_add(1) == 0) {
      warn("empirical conditional: no background row matches coalition " + s.to_hex() +
           "; averaging the Hamming-nearest rows (further fallbacks are only counted)");
    }
  }
  return sum / static_cast<double>(count);
}

EmpiricalConditionalVf::EmpiricalConditionalVf(
    std::shared_ptr<const EmpiricalConditionalContext> context, Vector x, int y)
    : context_(std::move(context)), x_(std::move(x)), y_(y) {
  check_width(x_, context_->n_features(), "empirical conditional value function");
  check_class(y_, static_cast<std::size_t>(context_->predictions().cols()));
}

void EmpiricalConditionalVf::evaluate_batch(std::span<const Coalition> coalitions, Rng&,
                                            std::span<double> out) const {
  for (std::size_t k = 0; k < coalitions.size(); ++k) {
    out[k] = context_->conditional_mean(x_, coalitions[k], y_);
  }
}

SamplerVf::SamplerVf(ModelPtr model, std::shared_ptr<const ConditionalSampler> sampler, Vector x,
                     int y, std::size_t n_inner)
    : model_(std::move(model)),
      sampler_(std::move(sampler)),
      x_(std::move(x)),
      y_(y),
      n_inner_(n_inner) {
  if (sampler_->n_features() != model_->n_features()) {
    throw ShapeError("conditional sampler schema does not match the model (" +
                     std::to_string(sampler_->n_features()) + " vs " +
                     std::to_string(model_->n_features()) + " features)");
  }
  check_width(x_, model_->n_features(), "generative value function");
  check_class(y_, model_->n_outputs());
  if (n_inner_ == 0) throw UsageError("n_inner_samples must be at least 1");
}

void SamplerVf::evaluate_batch(std::span<const Coalition> coalitions, Rng& rng,
                               std::span<double> out) const {
  std::vector<double> variance(coalitions.size());
  evaluate_batch_with_variance(coalitions, rng, out, variance);
}

void SamplerVf::evaluate_batch_with_variance(std::span<const Coalition> coalitions, Rng& rng,
                                             std::span<double> out,
                                             std::span<double> variance) const {
  const Matrix draws = sampler_->sample(x_, coalitions, n_inner_, rng);
  const Matrix pred = model_->predict(draws);
  inner_means(pred.col(y_), n_inner_, false, out, variance);
}

SurrogateVf::SurrogateVf(std::shared_ptr<const Surrogate> surrogate, Vector x, int y)
    : surrogate_(std::move(surrogate)), x_(std::move(x)), y_(y) {
  check_width(x_, surrogate_->n_features(), "surrogate value function");
  check_class(y_, surrogate_->n_outputs());
}

void SurrogateVf::evaluate_batch(std::span<const Coalition> coalitions, Rng&,
                                 std::span<double> out) const {
  Matrix masked(static_cast<Eigen::Index>(coalitions.size()), x_.size());
  for (std::size_t k = 0; k < coalitions.size(); ++k) {
    apply_mask(x_.data(), coalitions[k], masked.row(static_cast<Eigen::Index>(k)).data());
  }
  const Matrix pred = surrogate_->predict_masked(masked);
  for (std::size_t k = 0; k < coalitions.size(); ++k) out[k] = pred(static_cast<Eigen::Index>(k), y_);
}

VfFactory off_manifold_factory(ModelPtr model, std::shared_ptr<const Matrix> background,
                               std::size_t n_inner) {
  return [=](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<OffManifoldVf>(model, background, x, y, n_inner);
  };
}

VfFactory empirical_factory(std::shared_ptr<const EmpiricalConditionalContext> context) {
  return [=](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<EmpiricalConditionalVf>(context, x, y);
  };
}

VfFactory sampler_factory(ModelPtr model, std::shared_ptr<const ConditionalSampler> sampler,
                          std::size_t n_inner) {
  return [=](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<SamplerVf>(model, sampler, x, y, n_inner);
  };
}

VfFactory surrogate_factory(std::shared_ptr<const Surrogate> surrogate) {
  return [=](const Vector& x, int y) -> ValueFunctionPtr {
    return std::make_unique<SurrogateVf>(surrogate, x, y);
  };
}

RetrainingCache::RetrainingCache(std::optional<std::filesystem::path> path)
    : path_(std::move(path)) {
  if (!path_ || !std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      RetrainingRecord r{doc.at("coalition").get<std::string>(), doc.at("accuracy").get<double>(),
                         doc.at("std_error").get<double>(), doc.at("seed").get<std::uint64_t>()};
      records_[doc.at("dataset").get<std::string>() + "|" + r.coalition_hex + "|" +
               std::to_string(r.seed)] = r;
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run is skipped and refit.
      warn("retraining cache " + path_->string() + ": skipping malformed line " +
           std::to_string(line_no));
    }
  }
}

std::optional<RetrainingRecord> RetrainingCache::find(const std::string& dataset,
                                                      const std::string& coalition_hex,
                                                      std::uint64_t seed) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(dataset + "|" + coalition_hex + "|" + std::to_string(seed));
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void RetrainingCache::store(const std::string& dataset, const RetrainingRecord& record) {
  std::lock_guard lock(mutex_);
  records_[dataset + "|" + record.coalition_hex + "|" + std::to_string(record.seed)] = record;
  if (!path_) return;
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  std::ofstream out(*path_, std::ios::app);
  if (!out) throw DataError("cannot append to retraining cache " + path_->string());
  const nlohmann::json doc = {{"dataset", dataset},
                              {"coalition", record.coalition_hex},
                              {"accuracy", record.accuracy},
                              {"std_error", record.std_error},
                              {"seed", record.seed}};
  out << doc.dump() << '\n';
  out.flush();
}

std::size_t RetrainingCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

RetrainingGame::RetrainingGame(Matrix train_x, std::vector<int> train_y, Matrix test_x,
                               std::vector<int> test_y, std::size_t n_classes,
                               ModelTrainer trainer, std::uint64_t seed,
                               std::string dataset_fingerprint,
                               std::shared_ptr<RetrainingCache> cache)
    : train_x_(std::move(train_x)),
      train_y_(std::move(train_y)),
      test_x_(std::move(test_x)),
      test_y_(std::move(test_y)),
      n_classes_(n_classes),
      trainer_(std::move(trainer)),
      seed_(seed),
      dataset_(std::move(dataset_fingerprint)),
      cache_(cache ? std::move(cache) : std::make_shared<RetrainingCache>()) {
  if (test_y_.empty()) throw DataError("retraining game needs test rows");
}

RetrainingRecord RetrainingGame::fit(const Coalition& s) const {
  const std::string hex = s.to_hex();
  if (auto hit = cache_->find(dataset_, hex, seed_)) return *hit;

  RetrainingRecord record{hex, 0.0, 0.0, seed_};
  const std::vector<std::size_t> members = s.members();
  if (members.empty()) {
    std::vector<double> freq(n_classes_, 0.0);
    for (int y : test_y_) freq[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(test_y_.size());
    for (double p : freq) record.accuracy += p * p;
  } else {
    auto columns = [&](const Matrix& m) {
      Matrix out(m.rows(), static_cast<Eigen::Index>(members.size()));
      for (std::size_t k = 0; k < members.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(members[k]));
      }
      return out;
    };
    const ModelPtr g = trainer_(columns(train_x_), train_y_, derive_seed(seed_, fnv1a(hex)));
    const Matrix probs = g->predict(columns(test_x_));
    if (static_cast<std::size_t>(probs.cols()) < n_classes_) {
      throw ShapeError("retrained model has fewer outputs than classes");
    }
    RunningStats stats;
    for (std::size_t i = 0; i < test_y_.size(); ++i) {
      stats.add(probs(static_cast<Eigen::Index>(i), test_y_[i]));
    }
    record.accuracy = stats.mean();
    record.std_error = stats.count() > 1 ? stats.std_error() : 0.0;
    fits_.fetch_add(1);
  }
  cache_->store(dataset_, record);
  return record;
}

void RetrainingGame::evaluate_batch(std::span<const Coalition> coalitions, Rng&,
                                    std::span<double> out) const {
  for (std::size_t k = 0; k < coalitions.size(); ++k) out[k] = fit(coalitions[k]).accuracy;
}

void RetrainingGame::prefetch_all() const {
  const std::size_t n = n_features();
  if (n > 20) throw UsageError("the retraining game enumerates 2^n coalitions; n must be <= 20");
  parallel_for(std::size_t{1} << n, [&](std::size_t bits) { fit(Coalition::from_bits(n, bits)); });
}

}  // namespace onshap
