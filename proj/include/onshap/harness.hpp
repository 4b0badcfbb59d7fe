#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace onshap {

/// Runs named stages with results cached on disk under out_dir/cache, keyed by
/// a fingerprint of the stage name and its inputs, and records the artifacts a
/// recipe writes.
class StageRunner {
 public:
  explicit StageRunner(std::filesystem::path out_dir, bool use_cache = true);

  const std::filesystem::path& out_dir() const { return out_dir_; }

  /// Returns the stored result for (name, key) or runs `compute` and stores it.
  nlohmann::json run(const std::string& name, const nlohmann::json& key, bool training,
                     const std::function<nlohmann::json()>& compute);

  /// Writes out_dir/relative atomically and lists it in the manifest.
  void write_artifact(const std::filesystem::path& relative, const std::string& content,
                      const std::string& kind);

  std::size_t stages_computed() const { return computed_; }
  std::size_t stages_cached() const { return cached_; }
  std::size_t training_stages_computed() const { return training_computed_; }

  /// Run manifest: artifacts with fingerprints, stage log, optional failure.
  nlohmann::json manifest(const std::string& recipe, std::uint64_t seed,
                          const nlohmann::json& config) const;
  void record_failure(const std::string& stage, const std::string& message);
  const std::string& current_stage() const { return current_stage_; }

 private:
  std::filesystem::path out_dir_;
  bool use_cache_;
  std::size_t computed_ = 0;
  std::size_t cached_ = 0;
  std::size_t training_computed_ = 0;
  std::string current_stage_;
  nlohmann::json artifacts_ = nlohmann::json::array();
  nlohmann::json stages_ = nlohmann::json::array();
  nlohmann::json failure_;
  std::chrono::system_clock::time_point started_;
};

std::string utc_timestamp(std::chrono::system_clock::time_point t);

}  // namespace onshap
