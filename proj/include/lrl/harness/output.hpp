#pragma once

#include <Eigen/Core>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrl/errors.hpp"
#include "lrl/harness/config.hpp"
#include "lrl/lifelong.hpp"

namespace lrl::harness {

inline constexpr const char* kToolVersion = "0.1.0";

/// What an experiment leaves behind: files written (relative to the output
/// directory), a human-readable summary and any failed trials.
struct ExperimentReport {
  std::vector<std::string> files;
  std::vector<std::string> summary;
  std::vector<std::string> failures;
  bool ok() const noexcept { return failures.empty(); }
};

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  void write(const std::string& relative, const std::string& content, ExperimentReport& report) const {
    const std::filesystem::path path = root_ / relative;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot write " + path.string());
    out << content;
    if (!out) throw ResourceError("write failed for " + path.string());
    report.files.push_back(relative);
  }

 private:
  std::filesystem::path root_;
};

/// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

inline std::string fmt(double v) { return lrl::detail::format_real(v); }

inline void write_manifest(const OutputDir& dir, const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["tool"] = "lrl";
  j["version"] = kToolVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["experiment"] = to_string(cfg.experiment);
  j["config_hash"] = config_hash(cfg);
  j["config"] = config_json(cfg);
  j["trial_seeds"] = seeds;
  j["files"] = report.files;
  j["failures"] = report.failures;
  dir.write("manifest.json", j.dump(2) + "\n", report);
}

}  // namespace lrl::harness
