// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by number; no arguments runs them all.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "dnls/geometry.hpp"
#include "dnls/grid.hpp"
#include "dnls/observables.hpp"
#include "dnls/rays.hpp"
#include "dnls/recorder.hpp"
#include "dnls/scattering.hpp"
#include "dnls/solver.hpp"

using namespace dnls;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Field gaussian(const GridSpec& spec, double amp, double sigma, Vec3 c = {0, 0, 0}, Vec3 p = {0, 0, 0}) {
  return Field::from_function(spec, [=](const Vec3& x) {
    double r2 = 0.0, phase = 0.0;
    for (int d = 0; d < 3; ++d) {
      r2 += (x[d] - c[d]) * (x[d] - c[d]);
      phase += p[d] * x[d];
    }
    return amp * std::exp(-0.5 * r2 / (sigma * sigma)) * std::polar(1.0, phase);
  });
}

Geometry undamped(Preset p, const GridSpec& spec) {
  GeometryParams g = preset_defaults(p);
  g.damping_amplitude = 0.0;
  return build_preset(p, g, spec);
}

// the trapping ring with a damping plateau covering it
GeometryParams controlled_ring() {
  GeometryParams g = preset_defaults(Preset::uncontrolled_bump);
  g.damping_outer = 4.6;
  g.damping_width = 0.7;
  return g;
}

struct Run {
  std::map<std::string, ObservableSeries> raw;
  std::map<std::string, ObservableSeries> derived;
  std::vector<Field> snaps;
  std::vector<double> snap_times;
};

Run run(const Geometry& geo, const Field& u0, const SolverConfig& s, const ObservableConfig& o,
        int snapshot_every = 0) {
  RunRecorder rec(geo, o);
  std::vector<Monitor> mons = rec.monitors();
  Run out;
  if (snapshot_every > 0)
    mons.push_back({snapshot_every, [&](const SimulationState& st) {
                      out.snaps.push_back(st.u);
                      out.snap_times.push_back(st.t);
                    }});
  simulate(u0, 0.0, geo, s, mons);
  out.raw = rec.raw_series();
  out.derived = rec.derived();
  return out;
}

ObservableConfig plain() {
  ObservableConfig o;
  o.morawetz = false;
  o.lambda = false;
  o.local = false;
  o.cutoff = false;
  return o;
}

double max_abs(const ObservableSeries& s) {
  double m = 0.0;
  for (double v : s.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_rel_drift(const ObservableSeries& s) {
  double m = 0.0;
  for (double v : s.values()) m = std::max(m, std::abs(v - s.front()) / std::abs(s.front()));
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criteria

Verdict conservation() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec spec{3, 64, 8.0};
  // weakly nonlinear smooth datum, periodic to machine precision on the box
  const Field u0 = gaussian(spec, 0.1, 1.5);
  bool pass = true;
  std::string detail;
  for (Preset p : {Preset::identity, Preset::conformal_bump}) {
    const Geometry geo = undamped(p, spec);
    SolverConfig s;
    s.T = 1.0;
    s.dt = cfl_suggestion(spec, geo.metric, s) / 4.0;
    ObservableConfig o = plain();
    o.record_every = 5;
    const Run r = run(geo, u0, s, o);
    const double dm = max_rel_drift(r.raw.at("mass")), de = max_rel_drift(r.raw.at("energy"));
    pass = pass && dm < 1e-8 && de < 1e-6;
    detail += fmt("%s: dt %.4f dM %.2e dE %.2e; ", to_string(p).c_str(), s.dt, dm, de);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 60.0, detail + fmt("64^3 in %.1f s", secs)};
}

// the damped bump at dt and dt/2; 256^2 resolves the products with the damping profile
std::pair<Run, Run> damped_pair(double dt) {
  const GridSpec spec{2, 256, 16.0};
  const Geometry geo = build_preset(Preset::conformal_bump, preset_defaults(Preset::conformal_bump), spec);
  const Field u0 = gaussian(spec, 0.5, 1.0, {0.5, 0, 0}, {0.5, 0, 0});
  SolverConfig s;
  s.T = 1.0;
  s.dt = dt;
  const ObservableConfig o = plain();
  Run coarse = run(geo, u0, s, o);
  s.dt = dt / 2;
  Run fine = run(geo, u0, s, o);
  return {std::move(coarse), std::move(fine)};
}

Verdict mass_law() {
  const auto [coarse, fine] = damped_pair(0.01);
  const double a = max_abs(coarse.derived.at("mass_residual")), b = max_abs(fine.derived.at("mass_residual"));
  return {a / b >= 3.5, fmt("max|r| %.3e -> %.3e, ratio %.2f", a, b, a / b)};
}

Verdict energy_law() {
  const auto [coarse, fine] = damped_pair(0.01);
  const double a = max_abs(coarse.derived.at("energy_residual"));
  const double b = max_abs(fine.derived.at("energy_residual"));
  double gap = 0.0;
  for (const Run* r : {&coarse, &fine}) {
    const auto& r1 = r->derived.at("energy_residual").values();
    const auto& r2 = r->derived.at("energy_residual_flux").values();
    for (std::size_t i = 0; i < r1.size(); ++i) gap = std::max(gap, std::abs(r1[i] - r2[i]));
  }
  return {a / b >= 3.5 && gap < 1e-9, fmt("max|r| %.3e -> %.3e, ratio %.2f; two-form gap %.2e", a, b, a / b, gap)};
}

Verdict morawetz() {
  const GridSpec spec{2, 128, 16.0};
  const Geometry geo = undamped(Preset::identity, spec);
  const Field u0 = gaussian(spec, 0.5, 1.0, {1.0, 0, 0}, {0.5, 0.3, 0});
  ObservableConfig o = plain();
  o.morawetz = true;
  double res[2];
  for (int k = 0; k < 2; ++k) {
    SolverConfig s;
    s.T = 1.0;
    s.dt = SolverConfig{}.dt / (1 << k);
    const Run r = run(geo, u0, s, o);
    res[k] = morawetz_rate_residual(r.raw.at("virial"), r.raw.at("virial_rhs")).max_abs;
  }
  return {res[0] < 1e-4 && res[0] / res[1] >= 3.5,
          fmt("max residual %.3e -> %.3e, ratio %.2f", res[0], res[1], res[0] / res[1])};
}

Verdict lambda_bound() {
  const GridSpec spec{2, 128, 16.0};
  const Field u0 = gaussian(spec, 0.5, 1.0, {0.5, 0, 0}, {0.5, 0, 0});
  const std::vector<std::pair<std::string, Geometry>> geos{
      {"identity", build_preset(Preset::identity, preset_defaults(Preset::identity), spec)},
      {"conformal_bump", build_preset(Preset::conformal_bump, preset_defaults(Preset::conformal_bump), spec)},
      {"anisotropic_bump",
       build_preset(Preset::anisotropic_bump, preset_defaults(Preset::anisotropic_bump), spec)},
      {"controlled ring", build_preset(Preset::uncontrolled_bump, controlled_ring(), spec)}};
  bool pass = true;
  std::string detail;
  for (const auto& [name, geo] : geos) {
    SolverConfig s;
    s.T = 10.0;
    s.dt = std::min(0.02, cfl_suggestion(spec, geo.metric, s));
    ObservableConfig o = plain();
    o.lambda = true;
    o.record_every = 5;
    RunRecorder rec(geo, o);
    simulate(u0, 0.0, geo, s, rec.monitors());
    const auto derived = rec.derived();
    const auto& lam = derived.at("lambda");
    double worst_step = 0.0, worst_t = 0.0;
    for (std::size_t i = 1; i < lam.size(); ++i) {
      const double inc = lam.values()[i] - lam.values()[i - 1];
      if (inc < worst_step) {
        worst_step = inc;
        worst_t = lam.times()[i];
      }
    }
    const bool monotone = worst_step >= 0.0;
    const double c0 = energy_lambda_constant(rec.lap_g_a(), rec.weights());
    const BoundReport b = energy_lambda_bound_check(rec.raw("energy"), lam, c0, 1e-9);
    pass = pass && monotone && b.holds;
    detail += fmt("%s: monotone %d (worst step %.2e at t=%.2f) bound %d (C0 %.3g); ", name.c_str(), monotone,
                  worst_step, worst_t, static_cast<int>(b.holds), c0);
  }
  return {pass, detail};
}

// the damped controlled-trapping run shared by the decay criteria
const Run& decay_run() {
  static const Run r = [] {
    const GridSpec spec{2, 128, 16.0};
    const Geometry geo = build_preset(Preset::uncontrolled_bump, controlled_ring(), spec);
    const Field u0 = gaussian(spec, 0.5, 1.0, {3.0, 0, 0}, {0, 1.0, 0});
    SolverConfig s;
    s.T = 40.0;
    s.dt = std::min(0.02, cfl_suggestion(spec, geo.metric, s));
    ObservableConfig o = plain();
    o.record_every = 5;
    o.local = true;
    o.local_radius = 5.0;
    o.cutoff = true;
    o.cutoff_radius = 5.5;
    o.cutoff_width = 1.0;
    return run(geo, u0, s, o);
  }();
  return r;
}

Verdict local_energy_decay() {
  const TailReport t = tail_verdict(decay_run().derived.at("local_energy_integral"));
  return {t.bounded, fmt("total %.4e, last quarter %.4e (%.2f%%)", t.total, t.last_quarter,
                         100.0 * t.last_quarter / t.total)};
}

Verdict local_hs_decay() {
  bool pass = true;
  std::string detail;
  for (double s : {0.0, 0.5}) {
    const ObservableSeries& c = decay_run().raw.at(cutoff_series_name(s));
    double peak = 0.0;
    for (double v : c.values()) peak = std::max(peak, v);
    pass = pass && c.back() < 0.2 * peak;
    detail += fmt("s=%.1f: final/max %.3f; ", s, c.back() / peak);
  }
  return {pass, detail};
}

Verdict bilinear() {
  const GridSpec spec{3, 16, 4.0};
  const WeightTables w = weight_tables(spec);
  const Field u = gaussian(spec, 1.0, 0.9, {0.4, -0.3, 0.2}, {0.9, 0, 0}) +
                  gaussian(spec, 0.6, 0.7, {-1.0, 0.8, 0.0}, {-0.5, 0, 0});
  const double fast = bilinear_B(u, w);
  // direct double sum against grad rho(x - y) = (x - y)/|x - y| over periodic displacements
  const auto grad = gradient(u);
  const int n = spec.n;
  double slow = 0.0;
  for (std::size_t x = 0; x < u.size(); ++x) {
    const auto ix = spec.index(x);
    double j[3];
    for (int k = 0; k < 3; ++k) j[k] = (std::conj(u[x]) * grad[k][x]).imag();
    for (std::size_t y = 0; y < u.size(); ++y) {
      const auto iy = spec.index(y);
      double d[3], r2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        int m = ((ix[k] - iy[k]) % n + n) % n;
        if (m >= n / 2) m -= n;
        d[k] = m * spec.dx();
        r2 += d[k] * d[k];
      }
      if (r2 == 0.0) continue;
      slow += std::norm(u[y]) * (j[0] * d[0] + j[1] * d[1] + j[2] * d[2]) / std::sqrt(r2);
    }
  }
  slow *= spec.cell_volume() * spec.cell_volume();
  const double rel = std::abs(fast - slow) / std::abs(slow);

  const GridSpec big{3, 64, 8.0};
  const Geometry geo = undamped(Preset::identity, big);
  SolverConfig s;
  s.T = 1.0;
  s.dt = 0.02;
  ObservableConfig o = plain();
  o.bilinear = true;
  o.bilinear_every = 5;
  o.local = true;
  const Run r = run(geo, gaussian(big, 0.5, 1.0, {0.5, 0, 0}, {1.0, 0, 0}), s, o);
  const ObservableSeries& b = r.raw.at("bilinear_B");
  const ObservableSeries& l4 = r.derived.at("l4_integral");
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.size(); ++i)
    slack = std::min(slack, b.values()[i] - b.front() - 4.0 * std::numbers::pi * l4.at(b.times()[i]) + 1e-6);
  return {rel < 1e-6 && slack >= 0.0, fmt("oracle rel %.2e; min slack %.3e (B gain %.4e, 4pi int l4 %.4e)", rel,
                                          slack, b.back() - b.front(), 4.0 * std::numbers::pi * l4.back())};
}

Verdict ray_tracer() {
  bool pass = true;
  std::string detail;
  // Hamiltonian drift on every preset
  double drift = 0.0;
  for (Preset p : {Preset::identity, Preset::conformal_bump, Preset::anisotropic_bump, Preset::uncontrolled_bump}) {
    const MetricModel g(2, p, preset_defaults(p));
    const auto traj = integrate_ray({-1.0, 2.5, 0}, {0.6, -0.8, 0}, g, 10.0, 1e-3);
    const double h0 = hamiltonian(traj.front().x, traj.front().xi, g);
    for (const auto& s : traj) drift = std::max(drift, std::abs(hamiltonian(s.x, s.xi, g) - h0) / h0);
  }
  pass = pass && drift < 1e-8;
  detail += fmt("drift %.2e; ", drift);

  GeometryParams free = preset_defaults(Preset::identity);
  free.damping_amplitude = 0.0;
  EnsembleSpec ens;
  ens.count = 64;
  ens.sample_radius = 2.0;
  const double r_esc = 5.0;
  const EnsembleSummary f = verify_exterior_control(ens, 2, MetricModel(2, Preset::identity, free),
                                                    DampingModel(free), 10.0, 1e-3, r_esc, 1e-8);
  double exit_err = 0.0;
  for (const auto& ray : f.rays) {
    // |x0 + 2 t xi0| = r_esc with |xi0| = 1
    const double b = ray.x0[0] * ray.xi0[0] + ray.x0[1] * ray.xi0[1];
    const double c = ray.x0[0] * ray.x0[0] + ray.x0[1] * ray.x0[1] - r_esc * r_esc;
    const double t = (-b + std::sqrt(b * b - c)) / 2.0;
    exit_err = std::max(exit_err, std::abs(ray.fate.t_exit - t));
  }
  pass = pass && f.escaped == static_cast<int>(f.rays.size()) && exit_err < 1e-9;
  detail += fmt("free %d/%zu escaped, exit err %.1e; ", f.escaped, f.rays.size(), exit_err);

  EnsembleSpec lat;
  lat.kind = EnsembleSpec::Kind::lattice;
  lat.lattice_points = 9;
  lat.lattice_directions = 16;
  lat.sample_radius = 3.5;
  const GeometryParams open = preset_defaults(Preset::uncontrolled_bump);
  const MetricModel ring(2, Preset::uncontrolled_bump, open);
  const EnsembleSummary u = verify_exterior_control(lat, 2, ring, DampingModel(open), 30.0, 2e-3,
                                                    default_escape_radius(ring, DampingModel(open)), open.a_min);
  const GeometryParams closed = controlled_ring();
  const EnsembleSummary c = verify_exterior_control(lat, 2, ring, DampingModel(closed), 30.0, 2e-3,
                                                    default_escape_radius(ring, DampingModel(closed)), closed.a_min);
  pass = pass && u.trapped >= 1 && c.trapped == 0;
  detail += fmt("ring trapped %d, controlled ring trapped %d", u.trapped, c.trapped);
  return {pass, detail};
}

Verdict scattering() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (const bool trapping : {false, true}) {
    const GridSpec spec{3, 64, 10.0};
    const Geometry geo = trapping ? build_preset(Preset::uncontrolled_bump, controlled_ring(), spec)
                                  : undamped(Preset::identity, spec);
    SolverConfig s;
    s.T = 20.0;
    s.dt = std::min(0.05, cfl_suggestion(spec, geo.metric, s));
    const long steps = std::lround(s.T / s.dt);
    const Run r = run(geo, gaussian(spec, 0.2, 1.0, {1.0, 0, 0}, {0, 0.5, 0}), s, plain(), std::max(1L, steps / 20));
    const std::vector<double> s_list{0.5};
    ScatterReport rep = cauchy_scan(r.snaps, r.snap_times, s_list);
    extract_profile(rep, r.snaps);
    const double mismatch = rep.mismatch[0].back() / rep.profile_norm[0];
    pass = pass && rep.verdict[0] && mismatch < 0.1;
    detail += fmt("%s: monotone %d, final mismatch %.1e; ", trapping ? "controlled ring" : "G=I",
                  static_cast<int>(rep.verdict[0]), mismatch);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 600.0, detail + fmt("64^3 in %.1f s", secs)};
}

Verdict backward_bound() {
  const GridSpec spec{2, 128, 16.0};
  const Geometry geo = build_preset(Preset::conformal_bump, preset_defaults(Preset::conformal_bump), spec);
  SolverConfig s;
  s.T = -0.5;
  s.dt = 0.01;
  double a_sup = 0.0;
  for (double v : geo.damping.values) a_sup = std::max(a_sup, v);
  std::vector<std::pair<double, double>> m;
  const std::vector<Monitor> mons{{1, [&](const SimulationState& st) { m.emplace_back(st.t, mass(st.u)); }}};
  simulate(gaussian(spec, 0.5, 1.0, {0.5, 0, 0}, {0.5, 0, 0}), 0.0, geo, s, mons);
  double worst = 0.0;
  for (const auto& [t, v] : m) worst = std::max(worst, v / (m.front().second * std::exp(2.0 * a_sup * std::abs(t)) * (1.0 + 1e-6)));
  return {worst <= 1.0, fmt("max M/bound %.6f, M(-0.5)/M(0) %.4f", worst, m.back().second / m.front().second)};
}

Verdict stability() {
  const GridSpec spec{2, 128, 16.0};
  const Geometry geo = build_preset(Preset::conformal_bump, preset_defaults(Preset::conformal_bump), spec);
  SolverConfig s;
  s.T = 1.0;
  s.dt = 0.02;
  const Field u0 = gaussian(spec, 0.5, 1.0, {0.5, 0, 0}, {0.5, 0, 0});
  const double a = stability_probe(u0, 1e-3, geo, s).sup_difference;
  const double b = stability_probe(u0, 5e-4, geo, s).sup_difference;
  return {a / b >= 1.5 && a / b <= 2.5, fmt("sup diff %.4e -> %.4e, ratio %.3f", a, b, a / b)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"conservation", conservation},
      {"mass law order", mass_law},
      {"energy law order and two-form agreement", energy_law},
      {"Morawetz identity", morawetz},
      {"lambda monotonicity and energy-lambda bound", lambda_bound},
      {"local energy decay trend", local_energy_decay},
      {"local H^s decay", local_hs_decay},
      {"bilinear functional", bilinear},
      {"ray tracer", ray_tracer},
      {"scattering consistency", scattering},
      {"backward mass bound", backward_bound},
      {"stability probe", stability},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2d %-44s %s  [%.1f s] %s\n", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL",
                seconds_since(t0), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
