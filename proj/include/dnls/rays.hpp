#pragma once

// Hamiltonian flow of p(x, xi) = G(x) xi . xi and trajectory classification
// against the damping region.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnls/geometry.hpp"

namespace dnls {

struct RayState {
  Vec3 x{0.0, 0.0, 0.0};
  Vec3 xi{0.0, 0.0, 0.0};
  double t = 0.0;
};

enum class FateKind { escaped, controlled, trapped_at_horizon };
std::string to_string(FateKind k);

struct RayFate {
  FateKind kind = FateKind::trapped_at_horizon;
  double t_exit = -1.0;       // escaped only
  double t_first_hit = -1.0;  // -1 when the ray never met {a > a_min}
  double time_in_control = 0.0;
  double horizon = 0.0;
  double hamiltonian_drift = 0.0;  // max relative |H(t) - H(0)| / H(0)
};

double hamiltonian(const Vec3& x, const Vec3& xi, const MetricModel& g);

/// Classical RK4 on x' = 2 G xi, xi' = -sum_ij grad G_ij xi_i xi_j, recorded
/// at every step (including the initial state). A negative dt integrates
/// backward. If `stop` returns true the trajectory ends at that state.
std::vector<RayState> integrate_ray(const Vec3& x0, const Vec3& xi0, const MetricModel& g,
                                    double horizon, double dt,
                                    const std::function<bool(const RayState&)>& stop = {});

/// Classifies a recorded trajectory. Crossing times are located inside the
/// step with cubic Hermite interpolation of x(t).
RayFate classify_ray(std::span<const RayState> trajectory, const MetricModel& g,
                     const DampingModel& a, double r_escape, double a_min);

struct EnsembleSpec {
  enum class Kind { lattice, random } kind = Kind::random;
  int count = 256;           // random: number of rays
  int lattice_points = 5;    // lattice: points per axis in [-R, R]^dim
  int lattice_directions = 8;
  double sample_radius = 2.0;
  std::uint64_t seed = 1;
};

struct EnsembleRay {
  Vec3 x0;
  Vec3 xi0;
  RayFate fate;
};

struct EnsembleSummary {
  std::vector<EnsembleRay> rays;
  int escaped = 0;
  int controlled = 0;
  int trapped = 0;
  double max_hamiltonian_drift = 0.0;
  bool exterior_control_holds() const { return trapped == 0; }
};

/// Initial conditions of an ensemble: x0 in B(0, R), |xi0| = 1.
std::vector<std::pair<Vec3, Vec3>> ensemble_initial_conditions(const EnsembleSpec& spec, int dim);

/// Integrates every ray of the ensemble up to `horizon` (stopping at escape)
/// and tallies the fates.
EnsembleSummary verify_exterior_control(const EnsembleSpec& spec, int dim, const MetricModel& g,
                                        const DampingModel& a, double horizon, double dt,
                                        double r_escape, double a_min);

/// 1.5 * max(R_G, R_a) + 5.
double default_escape_radius(const MetricModel& g, const DampingModel& a);

}  // namespace dnls
