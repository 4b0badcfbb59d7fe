#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace onshap {

// Row-major so that a data point is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Rng = std::mt19937_64;

/// Value written into out-of-coalition slots of a masked input. Preprocessing
/// keeps every feature nonnegative so it never collides with real data.
inline constexpr double kMaskSentinel = -1.0;

// Process exit codes used by the CLI.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::usage; }
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::data; }
};

/// Input of the wrong dimensionality.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::numeric; }
};

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t last_finite_epoch)
      : NumericError(what), last_finite_epoch_(last_finite_epoch) {}
  std::size_t last_finite_epoch() const { return last_finite_epoch_; }

 private:
  std::size_t last_finite_epoch_;
};

// Warnings go through a replaceable sink so tests can count them.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

/// SplitMix64 finaliser; mixes a master seed with a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_a, std::uint64_t stream_b);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Streaming mean / variance (Welford).
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double sample_variance() const;
  double std_error() const;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

void set_default_threads(std::size_t threads);
std::size_t default_threads();

/// Runs fn(i) for i in [0, n) over a static contiguous partition. Results must
/// not depend on the partition; callers write into per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace onshap
