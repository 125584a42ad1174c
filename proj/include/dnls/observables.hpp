#pragma once

// Functionals of a snapshot (mass, energy, virial, interaction functional,
// local norms) and the time-series checks built on them.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnls/geometry.hpp"
#include "dnls/grid.hpp"
#include "dnls/solver.hpp"

namespace dnls {

class ObservableSeries {
 public:
  ObservableSeries() = default;
  explicit ObservableSeries(std::string name) : name_(std::move(name)) {}

  /// Throws StructuralError unless t exceeds the previous stamp and v is finite.
  void push(double t, double v);

  const std::string& name() const { return name_; }
  const std::vector<double>& times() const { return t_; }
  const std::vector<double>& values() const { return v_; }
  std::size_t size() const { return t_.size(); }
  bool empty() const { return t_.empty(); }
  double front() const { return v_.front(); }
  double back() const { return v_.back(); }

  /// Running trapezoid integral, same stamps, starting at 0.
  ObservableSeries cumulative(const std::string& name) const;
  /// Linear interpolation; clamps outside the recorded range.
  double at(double t) const;

 private:
  std::string name_;
  std::vector<double> t_;
  std::vector<double> v_;
};

/// Throws StructuralError unless both series carry identical stamps.
void require_aligned(const ObservableSeries& a, const ObservableSeries& b);

void write_csv(const std::filesystem::path& path, const ObservableSeries& s);

// ---- snapshot functionals

double mass(const Field& u);
double energy(const Field& u, const MetricField& g);
/// int a |u|^2
double damping_mass_rate(const Field& u, const DampingField& a);
/// int a (|u|^4 + G grad u . grad conj u)
double damping_energy_rate(const Field& u, const DampingField& a, const MetricField& g);
/// int |u|^2 lap_g_a, with lap_g_a = Delta_G a sampled on the grid
double metric_source_term(const Field& u, std::span<const double> lap_g_a);
/// Re int G grad u . conj(u) grad a
double damping_flux_term(const Field& u, const DampingField& a, const MetricField& g);

/// V = Im int conj(u) grad u . grad chi
double morawetz_virial(const Field& u, const WeightTables& w);
/// int 2 D^2chi grad u . grad conj u - 1/2 Delta^2chi |u|^2 + 1/2 Delta chi |u|^4
///     - 2 Im(a conj(u) grad u . grad chi)
double morawetz_rate(const Field& u, const WeightTables& w, const DampingField& a);
/// int over {|G - I|_F > g_tol} of |grad u|^2 + |u|^2 + |u|^4
double perturbation_proxy(const Field& u, const MetricField& g, double g_tol);
/// int (-Delta^2 chi) |u|^2
double lambda_integrand(const Field& u, const WeightTables& w);
double l4_power(const Field& u);  // int |u|^4
double local_energy(const Field& u, double radius);

// Variants reusing a precomputed spectral gradient of u.
double energy(const Field& u, const MetricField& g, std::span<const Field> grad);
double damping_energy_rate(const Field& u, const DampingField& a, const MetricField& g,
                           std::span<const Field> grad);
double damping_flux_term(const Field& u, std::span<const RealGrid> grad_a, const MetricField& g,
                         std::span<const Field> grad);
double morawetz_virial(const Field& u, const WeightTables& w, std::span<const Field> grad);
double morawetz_rate(const Field& u, const WeightTables& w, const DampingField& a,
                     std::span<const Field> grad);
double perturbation_proxy(const Field& u, const MetricField& g, double g_tol,
                          std::span<const Field> grad);
/// int over {a > a_min} of |grad u|^2 + |u|^2
double damping_region_energy(const Field& u, const DampingField& a, double a_min,
                             std::span<const Field> grad);
/// Spectral gradient of a real table.
std::vector<RealGrid> real_gradient(std::span<const double> f, const GridSpec& spec);

/// B = int |u(y)|^2 int Im(conj(u) grad u)(x) . grad rho(x - y) dx dy, with the
/// inner integral as a periodic FFT convolution against the tabulated kernel.
double bilinear_B(const Field& u, const WeightTables& w);

/// Sobolev norm of chi_cut * u; 0 <= s < 1 else DomainError.
double local_sobolev_decay(const Field& u, std::span<const double> chi_cut, double s);

// ---- residual series

/// r(t) = M(t) - M(0) + 2 int_0^t int a|u|^2
ObservableSeries mass_law_residual(const ObservableSeries& m, const ObservableSeries& a_mass);

/// r(t) = E(t) - E(0) + int_0^t int a(|u|^4 + G grad u . grad conj u) + int_0^t source
/// where source is -1/2 int |u|^2 Delta_G a, or Re int G grad u . conj(u) grad a for
/// the flux form. Both forms agree up to discrete integration by parts.
ObservableSeries energy_law_residual(const ObservableSeries& e, const ObservableSeries& a_energy,
                                     const ObservableSeries& source);

struct MorawetzResidual {
  ObservableSeries residual;  // dV/dt - RHS at interior records
  double max_abs = 0.0;
  double fitted_c = 0.0;  // least squares |r| ~ C proxy (0 without proxy)
};

/// dV/dt by second-order three-point differences on the recorded stamps.
/// Throws DomainError when fewer than 5 records are available.
MorawetzResidual morawetz_rate_residual(const ObservableSeries& v, const ObservableSeries& rhs,
                                        const ObservableSeries* proxy = nullptr);

/// lambda(t) = int_0^t int (-Delta^2 chi)|u|^2.
ObservableSeries lambda_accumulator(const ObservableSeries& integrand);

/// 1/2 max |Delta_G a| / (-Delta^2 chi) over the points where Delta_G a != 0.
/// Infinite when -Delta^2 chi <= 0 somewhere on that set.
double energy_lambda_constant(std::span<const double> lap_g_a, const WeightTables& w);

struct BoundReport {
  bool holds = true;
  double constant = 0.0;
  double worst_margin = 0.0;  // min of E(0) + C0 lambda + tol - E(t)
  double worst_time = 0.0;
};

BoundReport energy_lambda_bound_check(const ObservableSeries& e, const ObservableSeries& lambda,
                                      double c0, double tol);

struct TailReport {
  double total = 0.0;
  double last_quarter = 0.0;  // increment over the last quarter of the horizon
  bool bounded = false;       // last_quarter < 5% of total
};

/// Verdict on a running integral (non-decreasing series expected).
TailReport tail_verdict(const ObservableSeries& cumulative, double fraction = 0.05);

struct InteractionReport {
  bool holds = true;
  double fitted_c = 0.0;
  double lhs = 0.0;      // 4 pi int_0^T int |u|^4
  double delta_b = 0.0;  // B(T) - B(0)
  double worst_slack = 0.0;
};

/// 4 pi l4(t) <= C local(t) + B(t) - B(0) + tol at every B record, with the
/// smallest admissible C (0 if local vanishes where the free inequality holds).
InteractionReport interaction_inequality_check(const ObservableSeries& b,
                                               const ObservableSeries& l4_cumulative,
                                               const ObservableSeries& local_cumulative,
                                               double tol);

struct StabilityReport {
  double delta = 0.0;
  double sup_difference = 0.0;
  double amplification = 0.0;  // sup_difference / delta
};

/// Runs u0 and u0 + delta * phi (phi a fixed smooth unit-L2 field) and
/// reports the supremum over steps of their L2 distance.
StabilityReport stability_probe(const Field& u0, double delta, const Geometry& geo,
                                const SolverConfig& cfg);
Field probe_direction(const GridSpec& spec);

}  // namespace dnls
