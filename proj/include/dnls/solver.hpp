#pragma once

// Time stepping for i u_t + Delta_G u + i a u = |u|^2 u.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnls/errors.hpp"
#include "dnls/geometry.hpp"
#include "dnls/grid.hpp"

namespace dnls {

enum class Scheme { strang, rk4_mol };
Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

struct SolverConfig {
  double dt = 1e-2;
  double T = 1.0;  // end time; negative for backward probes
  Scheme scheme = Scheme::strang;
  bool dealias = true;
  int inner_perturbation_steps = 1;
  double boundary_mass_warn = 1e-6;
  bool nonlinear = true;  // cubic term on/off (off only for linear reference runs)

  /// Throws DomainError on dt <= 0, |T| < dt, inner steps < 1.
  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

struct SimulationState {
  Field u;
  double t = 0.0;
  long step = 0;
};

/// Raised when the run becomes non-finite or explodes; carries the last
/// finite state so callers can persist it.
class SimulationAborted : public StabilityError {
 public:
  SimulationAborted(const std::string& what, SimulationState last_good)
      : StabilityError(what), last_good_(std::move(last_good)) {}
  const SimulationState& last_good() const { return last_good_; }

 private:
  SimulationState last_good_;
};

/// Exact flow of u_t = -a u - i|u|^2 u over time tau (pointwise).
Field nonlinear_damping_substep(const Field& u, const DampingField& a, double tau,
                                bool nonlinear = true);

/// Approximates exp(i tau Delta_G) u. Exact multiplier when G = I; otherwise
/// free half step, RK4 steps on u_t = i div((G-I) grad u), free half step.
Field linear_substep(const Field& u, const MetricField& g, double tau, const SolverConfig& cfg);

/// One step of size cfg.dt in the direction of cfg.T.
SimulationState step(const SimulationState& state, const Geometry& geo, const SolverConfig& cfg);

/// Stable step bound: rk4_mol C / (max|k|^2 (1 + sup|G-I|)); strang bound of
/// the perturbation substep, capped at |T|/10.
double cfl_suggestion(const GridSpec& spec, const MetricField& g, const SolverConfig& cfg);

/// Fraction of the mass in the outer 10% shell of the box.
double boundary_mass_fraction(const Field& u);

struct Monitor {
  int every = 1;
  std::function<void(const SimulationState&)> record;
};

struct SimulationResult {
  SimulationState final_state;
  std::vector<std::string> warnings;
  double max_boundary_fraction = 0.0;
};

/// Runs from t0 to cfg.T. Monitors fire at the first state, every `every`
/// steps, and at the final state.
SimulationResult simulate(const Field& u0, double t0, const Geometry& geo, const SolverConfig& cfg,
                          std::span<const Monitor> monitors = {});

}  // namespace dnls
