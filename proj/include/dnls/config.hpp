#pragma once

// Run configuration: sectioned "key = value" text, validated against the
// grid, geometry and solver constraints.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dnls/geometry.hpp"
#include "dnls/grid.hpp"
#include "dnls/recorder.hpp"
#include "dnls/rays.hpp"
#include "dnls/scattering.hpp"
#include "dnls/solver.hpp"

namespace dnls {

enum class InitialKind { gaussian, plane_wave };

struct InitialConfig {
  InitialKind kind = InitialKind::gaussian;
  double amplitude = 0.5;
  double width = 1.0;              // gaussian standard deviation
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 momentum{0.0, 0.0, 0.0};   // modulation e^{i p.x}; plane_wave uses the nearest lattice mode

  bool operator==(const InitialConfig&) const = default;
};

struct ScatteringConfig {
  std::vector<double> s_list = default_s_list;
  std::vector<double> snapshot_times;
  double tol_mono = 0.05;

  bool operator==(const ScatteringConfig&) const = default;
};

struct RaysConfig {
  EnsembleSpec::Kind kind = EnsembleSpec::Kind::random;
  int count = 256;
  int lattice_points = 5;
  int lattice_directions = 8;
  double sample_radius = 2.0;
  double horizon = 100.0;
  double dt = 1e-3;
  double r_escape = 0.0;  // 0 selects 1.5 max(R_G, R_a) + 5

  bool operator==(const RaysConfig&) const = default;
};

struct RunConfig {
  GridSpec grid{2, 128, 16.0};
  Preset preset = Preset::identity;
  GeometryParams geometry = preset_defaults(Preset::identity);
  InitialConfig initial;
  SolverConfig solver;
  int snapshot_every = 0;  // 0 disables periodic snapshots
  ObservableConfig observables;
  ScatteringConfig scattering;
  RaysConfig rays;
  std::string output = "out";
  std::uint64_t seed = 1;

  // "section.key" -> line of the source file; empty for programmatic configs
  std::map<std::string, int> key_lines;

  bool operator==(const RunConfig& o) const;
};

/// Parses and validates. Throws ConfigError carrying the offending line.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

/// Throws ConfigError (line-tagged when the key came from a file).
void validate_config(const RunConfig& cfg);

/// Every field, floats at 17 significant digits; parse_config_text inverts it.
std::string serialize_config(const RunConfig& cfg);
/// FNV-1a 64 of the serialized form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

EnsembleSpec ensemble_spec(const RunConfig& cfg);
Field initial_field(const RunConfig& cfg);

}  // namespace dnls
