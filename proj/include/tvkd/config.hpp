#pragma once

// JSON run configuration (schema in docs/formats.md). Unknown keys and wrong
// types are rejected with a ConfigError naming the dotted field path.

#include <cstdint>
#include <filesystem>
#include <string>

#include "tvkd/experiments.hpp"

namespace tvkd {

inline constexpr int kConfigFormatVersion = 1;

enum class LogLevel { Error, Warn, Info, Debug };

struct Paths {
  std::filesystem::path dataset = "data/dataset.jsonl";
  std::filesystem::path manifest = "data/manifest.json";
  std::filesystem::path cache = "data/teacher.cache";
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path reports = "reports";
};

struct VerifyConfig {
  std::uint32_t num_mdps = 10;
  std::uint32_t num_potentials = 100;  // per run, spread over the MDPs
  std::uint64_t potential_seed = 19;
  double terminal_potential = 0.0;     // nonzero injects a bad potential
};

struct ReportConfig {
  std::uint32_t token_top_k = 3;
  std::uint32_t annotate_pairs = 5;
};

struct GlobalConfig {
  int format_version = kConfigFormatVersion;
  std::uint64_t seed = 0;
  Paths paths;
  ExperimentConfig experiment;
  Method method;
  VerifyConfig verify;
  ReportConfig report;
  LogLevel log_level = LogLevel::Info;
  unsigned workers = 1;
};

/// Relative paths are resolved against `base_dir`.
GlobalConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
GlobalConfig load_config(const std::filesystem::path& path);  // IoError if unreadable

/// Effective configuration as JSON (paths as given after resolution).
std::string config_to_json(const GlobalConfig& cfg);

}  // namespace tvkd
