#include "onshap/harness.hpp"

#include <ctime>

#include "onshap/artifacts.hpp"
#include "onshap/common.hpp"
#include "onshap/dataset.hpp"

namespace onshap {

StageRunner::StageRunner(std::filesystem::path out_dir, bool use_cache)
    : out_dir_(std::move(out_dir)), use_cache_(use_cache), started_(std::chrono::system_clock::now()) {
  std::filesystem::create_directories(out_dir_);
}

nlohmann::json StageRunner::run(const std::string& name, const nlohmann::json& key, bool training,
                                const std::function<nlohmann::json()>& compute) {
  const std::string fingerprint = sha256_hex(name + "\n" + key.dump());
  std::string file_name = name;
  for (char& c : file_name) {
    if (c == '/' || c == ':' || c == ' ') c = '_';
  }
  const auto path = out_dir_ / "cache" / (file_name + "-" + fingerprint.substr(0, 16) + ".json");
  current_stage_ = name;
  if (use_cache_ && std::filesystem::exists(path)) {
    try {
      nlohmann::json doc = read_json(path);
      if (doc.value("fingerprint", std::string()) == fingerprint && doc.contains("result")) {
        ++cached_;
        stages_.push_back({{"name", name}, {"fingerprint", fingerprint}, {"cached", true}});
        return std::move(doc.at("result"));
      }
    } catch (const DataError&) {
      warn("stage cache " + path.string() + " is unreadable; recomputing");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json result = compute();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++computed_;
  if (training) ++training_computed_;
  stages_.push_back({{"name", name},
                     {"fingerprint", fingerprint},
                     {"cached", false},
                     {"training", training},
                     {"seconds", seconds}});
  if (use_cache_) {
    write_file_atomic(path, nlohmann::json{{"stage", name},
                                           {"fingerprint", fingerprint},
                                           {"key", key},
                                           {"result", result}}
                                .dump());
  }
  return result;
}

void StageRunner::write_artifact(const std::filesystem::path& relative, const std::string& content,
                                 const std::string& kind) {
  write_file_atomic(out_dir_ / relative, content);
  for (auto& a : artifacts_) {
    if (a.at("path") == relative.generic_string()) {
      a["sha256"] = sha256_hex(content);
      return;
    }
  }
  artifacts_.push_back(
      {{"path", relative.generic_string()}, {"kind", kind}, {"sha256", sha256_hex(content)}});
}

void StageRunner::record_failure(const std::string& stage, const std::string& message) {
  failure_ = {{"stage", stage}, {"message", message}};
}

nlohmann::json StageRunner::manifest(const std::string& recipe, std::uint64_t seed,
                                     const nlohmann::json& config) const {
  nlohmann::json doc = {{"format", "onshap-run-manifest"},
                        {"version", 1},
                        {"recipe", recipe},
                        {"seed", seed},
                        {"config", config},
                        {"status", failure_.is_null() ? "ok" : "failed"},
                        {"started_at", utc_timestamp(started_)},
                        {"finished_at", utc_timestamp(std::chrono::system_clock::now())},
                        {"stages_computed", computed_},
                        {"stages_cached", cached_},
                        {"training_stages_computed", training_computed_},
                        {"stages", stages_},
                        {"artifacts", artifacts_}};
  if (!failure_.is_null()) doc["failure"] = failure_;
  return doc;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t time = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&time, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

}  // namespace onshap
