#include "dnls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dnls {

namespace {

// below the RK4 stability limit 2*sqrt(2) on the imaginary axis
constexpr double rk4_imaginary_margin = 2.5;
constexpr double blowup_factor = 1e6;

}  // namespace

Scheme parse_scheme(const std::string& name) {
  if (name == "strang") return Scheme::strang;
  if (name == "rk4_mol") return Scheme::rk4_mol;
  throw DomainError("unknown scheme '" + name + "'");
}

std::string to_string(Scheme s) { return s == Scheme::strang ? "strang" : "rk4_mol"; }

void SolverConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!std::isfinite(T) || std::abs(T) < dt * (1.0 - 1e-12))
    throw DomainError("dt must not exceed |T|");
  if (inner_perturbation_steps < 1) throw DomainError("inner_perturbation_steps must be >= 1");
  if (!(boundary_mass_warn >= 0.0)) throw DomainError("boundary_mass_warn must be >= 0");
}

Field nonlinear_damping_substep(const Field& u, const DampingField& a, double tau, bool nonlinear) {
  if (a.values.size() != u.size()) throw StructuralError("damping does not match field");
  Field out = u;
  auto v = out.values();
  for (std::size_t p = 0; p < v.size(); ++p) {
    const double A = a.values[p];
    const double m = std::norm(v[p]);
    double decay = 1.0;
    double effective_time = tau;  // int_0^tau exp(-2 A s) ds
    if (A > 0.0) {
      decay = std::exp(-A * tau);
      effective_time = -std::expm1(-2.0 * A * tau) / (2.0 * A);
    }
    const double theta = nonlinear ? -m * effective_time : 0.0;
    v[p] *= decay * std::polar(1.0, theta);
  }
  return out;
}

namespace {

void check_growth(const Field& f, double reference, const char* where) {
  const double n = l2_norm(f);
  if (!std::isfinite(n) || n > blowup_factor * std::max(reference, 1e-300)) {
    std::ostringstream os;
    os << "norm explosion in " << where
       << "; reduce dt below cfl_suggestion or raise inner_perturbation_steps";
    throw StabilityError(os.str());
  }
}

Field perturbation_rhs(const Field& u, const MetricField& g, bool dealias_flux) {
  Field r = tensor_divergence(u, g.perturbation, dealias_flux);
  r *= cplx(0.0, 1.0);
  return r;
}

// one classical RK4 step of u' = F(u)
template <typename Rhs>
Field rk4(const Field& u, double h, Rhs&& rhs) {
  const Field k1 = rhs(u);
  const Field k2 = rhs(u + cplx(0.5 * h) * k1);
  const Field k3 = rhs(u + cplx(0.5 * h) * k2);
  const Field k4 = rhs(u + cplx(h) * k3);
  Field out = u;
  auto o = out.values();
  for (std::size_t p = 0; p < o.size(); ++p)
    o[p] += h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
  return out;
}

}  // namespace

Field linear_substep(const Field& u, const MetricField& g, double tau, const SolverConfig& cfg) {
  if (g.identity) return free_evolve(u, tau);
  const double reference = l2_norm(u);
  Field w = free_evolve(u, 0.5 * tau);
  const double h = tau / cfg.inner_perturbation_steps;
  for (int s = 0; s < cfg.inner_perturbation_steps; ++s) {
    w = rk4(w, h, [&](const Field& x) { return perturbation_rhs(x, g, cfg.dealias); });
    check_growth(w, reference, "metric perturbation substep");
  }
  return free_evolve(w, 0.5 * tau);
}

SimulationState step(const SimulationState& state, const Geometry& geo, const SolverConfig& cfg) {
  const double h = std::copysign(cfg.dt, cfg.T - state.t == 0.0 ? cfg.T : cfg.T - state.t);
  SimulationState next{state.u, state.t + h, state.step + 1};
  if (cfg.scheme == Scheme::strang) {
    Field w = nonlinear_damping_substep(state.u, geo.damping, 0.5 * h, cfg.nonlinear);
    if (cfg.dealias) dealias(w);
    w = linear_substep(w, geo.metric, h, cfg);
    w = nonlinear_damping_substep(w, geo.damping, 0.5 * h, cfg.nonlinear);
    if (cfg.dealias) dealias(w);
    next.u = std::move(w);
  } else {
    const double reference = l2_norm(state.u);
    const auto& a = geo.damping.values;
    auto rhs = [&](const Field& x) {
      Field lin = laplacian_G(x, geo.metric.samples, cfg.dealias);
      Field cubic(x.spec());
      if (cfg.nonlinear) {
        for (std::size_t p = 0; p < x.size(); ++p) cubic[p] = std::norm(x[p]) * x[p];
        if (cfg.dealias) dealias(cubic);
      }
      Field out(x.spec());
      for (std::size_t p = 0; p < x.size(); ++p)
        out[p] = cplx(0.0, 1.0) * (lin[p] - cubic[p]) - a[p] * x[p];
      return out;
    };
    next.u = rk4(state.u, h, rhs);
    check_growth(next.u, reference, "rk4_mol step");
  }
  return next;
}

double cfl_suggestion(const GridSpec& spec, const MetricField& g, const SolverConfig& cfg) {
  const double k2 = spectral(spec).max_k_squared(cfg.dealias);
  const double sup = perturbation_sup(g);
  const double cap = std::abs(cfg.T) / 10.0;
  if (cfg.scheme == Scheme::rk4_mol) return std::min(rk4_imaginary_margin / (k2 * (1.0 + sup)), cap);
  if (sup == 0.0) return cap;
  return std::min(rk4_imaginary_margin * cfg.inner_perturbation_steps / (k2 * sup), cap);
}

double boundary_mass_fraction(const Field& u) {
  const GridSpec& spec = u.spec();
  const double inner = 0.9 * spec.half_length;
  double shell = 0.0, total = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    const double m = std::norm(u[p]);
    total += m;
    const Vec3 x = spec.position(p);
    double edge = 0.0;
    for (int d = 0; d < spec.dim; ++d) edge = std::max(edge, std::abs(x[d]));
    if (edge >= inner) shell += m;
  }
  return total > 0.0 ? shell / total : 0.0;
}

SimulationResult simulate(const Field& u0, double t0, const Geometry& geo, const SolverConfig& cfg,
                          std::span<const Monitor> monitors) {
  cfg.validate();
  if (!(u0.spec() == geo.metric.spec())) throw StructuralError("initial data and geometry grids differ");
  const double span = cfg.T - t0;
  const long steps = std::lround(std::abs(span) / cfg.dt);
  SolverConfig local = cfg;
  if (steps > 0) local.dt = std::abs(span) / steps;  // land exactly on T

  SimulationResult result{SimulationState{u0, t0, 0}, {}, 0.0};
  auto fire = [&](const SimulationState& s, bool last) {
    for (const auto& m : monitors) {
      if (!m.record) continue;
      if (s.step % std::max(1, m.every) == 0 || last) m.record(s);
    }
  };

  bool warned = false;
  auto watch_boundary = [&](const SimulationState& s) {
    const double frac = boundary_mass_fraction(s.u);
    result.max_boundary_fraction = std::max(result.max_boundary_fraction, frac);
    if (!warned && frac > cfg.boundary_mass_warn) {
      std::ostringstream os;
      os << "boundary-shell mass fraction " << frac << " exceeds " << cfg.boundary_mass_warn
         << " at t = " << s.t << "; periodic wrap-around may contaminate results";
      result.warnings.push_back(os.str());
      warned = true;
    }
  };

  watch_boundary(result.final_state);
  fire(result.final_state, steps == 0);
  for (long n = 0; n < steps; ++n) {
    SimulationState next = [&] {
      try {
        return step(result.final_state, geo, local);
      } catch (const SimulationAborted&) {
        throw;
      } catch (const StabilityError& e) {
        throw SimulationAborted(e.what(), result.final_state);
      }
    }();
    next.t = t0 + std::copysign(local.dt, span) * (n + 1);
    if (!next.u.all_finite()) {
      std::ostringstream os;
      os << "solution became non-finite at t = " << next.t;
      throw SimulationAborted(os.str(), result.final_state);
    }
    if (next.step % 10 == 0 || n + 1 == steps) watch_boundary(next);
    try {
      fire(next, n + 1 == steps);
    } catch (const StabilityError& e) {
      // a diagnostic overflowed on next; the state before it is the last trusted one
      throw SimulationAborted(e.what(), result.final_state);
    }
    result.final_state = std::move(next);
  }
  return result;
}

}  // namespace dnls
