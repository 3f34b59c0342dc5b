#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nngp/config.hpp"

namespace nngp {

inline constexpr const char* kToolVersion = "0.3.1";

enum class OutputFormat { csv, json };

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string kind;
  std::string status = "ok";  // ok | error
  std::string error_category;
  std::string error_message;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<std::string> outputs;  // file names relative to the run directory
  nlohmann::json summary = nlohmann::json::object();

  nlohmann::json to_json() const;
};

struct RunResult {
  std::string directory;
  RunManifest manifest;
};

// Runs the experiment named by cfg.kind into `out_dir` (created if needed).
// manifest.json is written on every path, including failures; errors are
// rethrown after the manifest is on disk.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         OutputFormat format = OutputFormat::csv);

// Individual pipelines. They fill `manifest` (outputs, stages, summary) and
// write their files into out_dir; run_experiment wraps them.
void run_spectrum_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                             OutputFormat format, RunManifest& manifest);
void run_descent_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                            OutputFormat format, RunManifest& manifest);
void run_variance_scaling(const ExperimentConfig& cfg, const std::string& out_dir,
                          OutputFormat format, RunManifest& manifest);
void run_limits_check(const ExperimentConfig& cfg, const std::string& out_dir,
                      OutputFormat format, RunManifest& manifest);

// Error category names used in manifests; also drive CLI exit codes.
std::string error_category(const std::exception& e);
int exit_code_for(const std::exception& e);

// Theory inputs shared by the descent and limits pipelines.
DescentTheoryInputs make_theory_inputs(const ExperimentConfig& cfg);

}  // namespace nngp
