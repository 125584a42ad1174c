#pragma once

// Free-flow pullbacks of a run, their Cauchy differences in H^s, the
// extracted profile u_plus, and the cutoff decomposition w = (1 - chi) u.

#include <optional>
#include <span>
#include <vector>

#include "dnls/geometry.hpp"
#include "dnls/grid.hpp"

namespace dnls {

/// exp(-i t Delta) u: multiplier exp(+i |k|^2 t).
Field free_pullback(const Field& u, double t);

inline const std::vector<double> default_s_list{0.0, 0.25, 0.5, 0.75, 0.9};

struct ScatterReport {
  std::vector<double> times;
  std::vector<double> s_list;
  // cauchy[k][i][j] = |v(t_i) - v(t_j)|_{H^{s_k}}, v = free pullback
  std::vector<std::vector<std::vector<double>>> cauchy;
  std::vector<bool> verdict;  // per s
  std::optional<Field> profile;
  // mismatch[k][i] = |u(t_i) - exp(i t_i Delta) u_plus|_{H^{s_k}}
  std::vector<std::vector<double>> mismatch;
  std::vector<double> profile_norm;  // |u_plus|_{H^{s_k}}
};

/// Fills times, s_list, cauchy and verdict. The verdict at s holds when the
/// last-row entries over the final half of the horizon decrease in j, each
/// within a factor (1 + tol_mono) of its predecessor. Throws DomainError with
/// fewer than 3 snapshots.
ScatterReport cauchy_scan(std::span<const Field> snapshots, std::span<const double> times,
                          std::span<const double> s_list, double tol_mono = 0.05);

/// u_plus = pullback of the last snapshot; fills profile, mismatch and
/// profile_norm in place.
void extract_profile(ScatterReport& report, std::span<const Field> snapshots);

/// chi_cut with its spectral gradient and Laplacian.
struct Cutoff {
  GridSpec spec;
  RealGrid values;
  std::vector<RealGrid> grad;
  RealGrid lap;
};

/// Radial cutoff of the given radius/width. Throws ConfigError unless it
/// equals 1 (to 1e-12) wherever a > a_min.
Cutoff make_cutoff(const GridSpec& spec, double radius, double width, const DampingField& a,
                   double a_min);
Cutoff cutoff_from_values(const GridSpec& spec, RealGrid values);

/// [Delta, chi] u = (Delta chi) u + 2 grad chi . grad u
Field commutator(const Field& u, const Cutoff& chi);

struct CutoffRecord {
  std::vector<double> s_list;
  std::vector<double> chi_u_norm;  // |chi u|_{H^s}
  double commutator_l2 = 0.0;
  double exterior_l2 = 0.0;  // |(1 - chi) u|_{L^2}
};

CutoffRecord cutoff_diagnostics(const Field& u, const Cutoff& chi, std::span<const double> s_list);

}  // namespace dnls
