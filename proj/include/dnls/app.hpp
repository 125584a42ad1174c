#pragma once

// Subcommand orchestration: each run owns an output directory holding its
// CSVs, snapshots and a manifest.json listing all of them.

#include <filesystem>
#include <optional>
#include <string>

namespace dnls {

enum ExitCode : int {
  exit_ok = 0,
  exit_other = 1,
  exit_config = 2,
  exit_stability = 3,
  exit_verdict = 4,
};

struct CliOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> manifest;  // scatter input
  bool strict = false;
  bool quiet = false;
};

inline constexpr const char* dnls_version = "1.0.0";

/// Runs one of simulate, rays, check-geometry, scatter. Library errors
/// propagate as exceptions; map them with exit_code_for().
int run_subcommand(const std::string& name, const CliOptions& opts);

/// Exit code for an exception escaping run_subcommand.
int exit_code_for(const std::exception& e);

}  // namespace dnls
