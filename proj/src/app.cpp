#include "dnls/app.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "dnls/config.hpp"
#include "dnls/errors.hpp"
#include "dnls/geometry.hpp"
#include "dnls/observables.hpp"
#include "dnls/rays.hpp"
#include "dnls/recorder.hpp"
#include "dnls/scattering.hpp"
#include "dnls/solver.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace dnls {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Output directory plus the manifest describing it. Every file written
// through this class is listed; the manifest is rewritten after each change
// of status so an interrupted run is visibly INCOMPLETE.
class RunOutput {
 public:
  RunOutput(fs::path dir, std::string subcommand, const RunConfig& cfg, std::string manifest_name)
      : dir_(std::move(dir)), manifest_name_(std::move(manifest_name)) {
    fs::create_directories(dir_);
    doc_["tool"] = "dnls";
    doc_["version"] = dnls_version;
    doc_["fftw"] = std::string(fftw_version);
    doc_["subcommand"] = std::move(subcommand);
    doc_["status"] = "INCOMPLETE";
    doc_["config_hash"] = config_hash(cfg);
    doc_["seed"] = cfg.seed;
    doc_["files"] = json::array();
    doc_["snapshots"] = json::array();
    doc_["warnings"] = json::array();
    doc_["summary"] = json::object();
    std::ofstream(dir_ / "config.ini") << serialize_config(cfg);
    add_file("config.ini", "config");
    flush();
  }

  const fs::path& dir() const { return dir_; }
  json& summary() { return doc_["summary"]; }

  void add_file(const std::string& rel, const std::string& kind) {
    for (const auto& f : doc_["files"])
      if (f["path"] == rel) return;
    doc_["files"].push_back({{"path", rel}, {"kind", kind}});
  }

  void series(const ObservableSeries& s) {
    fs::create_directories(dir_ / "series");
    const std::string rel = "series/" + s.name() + ".csv";
    write_csv(dir_ / rel, s);
    add_file(rel, "series");
  }

  void snapshot(const std::string& rel, const Field& u, double t, long step, const std::string& role) {
    fs::create_directories((dir_ / rel).parent_path());
    write_snapshot(dir_ / rel, u, t);
    add_file(rel, "snapshot");
    doc_["snapshots"].push_back({{"path", rel}, {"time", t}, {"step", step}, {"role", role}});
  }

  void text(const std::string& rel, const std::string& body, const std::string& kind) {
    std::ofstream(dir_ / rel) << body;
    add_file(rel, kind);
  }

  void warn(const std::string& w, bool quiet) {
    doc_["warnings"].push_back(w);
    if (!quiet) std::cerr << "warning: " << w << "\n";
  }

  void finish(const std::string& status, const std::string& reason = "") {
    doc_["status"] = status;
    if (!reason.empty()) doc_["reason"] = reason;
    flush();
  }

  void flush() {
    std::ofstream os(dir_ / manifest_name_, std::ios::trunc);
    os << doc_.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  std::string manifest_name_;
  json doc_;
};

fs::path output_dir(const CliOptions& opts, const RunConfig& cfg) {
  return opts.out ? *opts.out : fs::path(cfg.output);
}

json control_json(const ControlReport& rep) {
  json j;
  j["satisfied"] = rep.satisfied;
  j["violations"] = rep.violations.size();
  j["delta0"] = std::isfinite(rep.delta0) ? json(rep.delta0) : json("inf");
  return j;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : "nan"); }

double max_abs(const ObservableSeries& s) {
  double m = 0.0;
  for (double v : s.values()) m = std::max(m, std::abs(v));
  return m;
}

// -------------------------------------------------------------- simulate

int simulate_command(const CliOptions& opts) {
  const RunConfig cfg = parse_config(opts.config);
  RunOutput out(output_dir(opts, cfg), "simulate", cfg, "manifest.json");
  const Geometry geo = build_preset(cfg.preset, cfg.geometry, cfg.grid);
  const ControlReport control = check_control(geo.metric, geo.damping, cfg.geometry.g_tol, cfg.geometry.a_min);
  out.summary()["control"] = control_json(control);
  if (!control.satisfied) {
    out.warn("control condition violated at " + std::to_string(control.violations.size()) + " grid points",
             opts.quiet);
    if (opts.strict) {
      out.finish("INCOMPLETE", "strict mode: control condition violated");
      return exit_verdict;
    }
  }

  Field u0 = initial_field(cfg);
  double t0 = 0.0;
  if (opts.resume) {
    SnapshotData snap = read_snapshot(*opts.resume);
    if (!(snap.u.spec() == cfg.grid)) throw ConfigError("resume snapshot grid does not match [grid]");
    u0 = std::move(snap.u);
    t0 = snap.time;
    out.summary()["resumed_from"] = opts.resume->string();
    out.summary()["resumed_time"] = t0;
  }
  if (cfg.solver.T == t0) throw ConfigError("nothing to do: the run already ends at T");
  out.summary()["cfl_suggestion"] = cfl_suggestion(cfg.grid, geo.metric, cfg.solver);

  const bool backward = cfg.solver.T < t0;
  const long steps = std::lround(std::abs(cfg.solver.T - t0) / cfg.solver.dt);
  const double h = std::abs(cfg.solver.T - t0) / std::max<long>(steps, 1);

  std::set<long> scatter_steps;
  for (double ts : cfg.scattering.snapshot_times) {
    const long k = std::lround((ts - t0) / h);
    if (k >= 0 && k <= steps) scatter_steps.insert(k);
  }

  std::vector<Monitor> monitors;
  std::optional<RunRecorder> recorder;
  std::vector<std::pair<double, double>> backward_mass;
  if (backward) {
    monitors.push_back({1, [&](const SimulationState& s) { backward_mass.emplace_back(s.t, mass(s.u)); }});
  } else {
    recorder.emplace(geo, cfg.observables);
    monitors = recorder->monitors();
  }
  monitors.push_back({1, [&](const SimulationState& s) {
                        char name[64];
                        if (scatter_steps.count(s.step)) {
                          std::snprintf(name, sizeof name, "snapshots/scatter_%08ld.dnls", s.step);
                          out.snapshot(name, s.u, s.t, s.step, "scatter");
                        } else if (cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0) {
                          std::snprintf(name, sizeof name, "snapshots/u_%08ld.dnls", s.step);
                          out.snapshot(name, s.u, s.t, s.step, "periodic");
                        }
                      }});

  auto emit_series = [&] {
    if (recorder) {
      for (const auto& [name, s] : recorder->raw_series()) out.series(s);
      for (const auto& [name, s] : recorder->derived()) out.series(s);
    }
    if (backward && !backward_mass.empty()) {
      std::sort(backward_mass.begin(), backward_mass.end());
      ObservableSeries m("mass");
      for (const auto& [t, v] : backward_mass) m.push(t, v);
      out.series(m);
    }
  };

  if (!opts.quiet)
    std::cerr << "simulate: " << steps << " steps of " << h << " from t = " << t0 << " to " << cfg.solver.T
              << "\n";
  std::optional<SimulationResult> run;
  try {
    run = simulate(u0, t0, geo, cfg.solver, monitors);
  } catch (const SimulationAborted& e) {
    out.snapshot("snapshots/last_good.dnls", e.last_good().u, e.last_good().t, e.last_good().step,
                 "last_good");
    try {
      emit_series();
    } catch (const std::exception&) {
      // partially recorded series may be inconsistent; the snapshot is what matters
    }
    out.finish("INCOMPLETE", e.what());
    throw;
  }
  const SimulationResult& result = *run;
  for (const auto& w : result.warnings) out.warn(w, opts.quiet);
  out.snapshot("snapshots/final.dnls", result.final_state.u, result.final_state.t, result.final_state.step,
               "final");
  emit_series();

  json& sum = out.summary();
  sum["steps"] = steps;
  sum["dt"] = h;
  sum["final_time"] = result.final_state.t;
  sum["max_boundary_fraction"] = result.max_boundary_fraction;
  if (backward) {
    double worst = 0.0;
    const double amax = *std::max_element(geo.damping.values.begin(), geo.damping.values.end());
    const double m0 = backward_mass.back().second;  // the initial state has the largest time
    for (const auto& [t, m] : backward_mass)
      worst = std::max(worst, m / (m0 * std::exp(2.0 * amax * std::abs(t - t0))));
    sum["backward_mass_ratio_max"] = worst;
    sum["backward_bound_holds"] = worst <= 1.0 + 1e-6;
  } else {
    const auto& raw = recorder->raw_series();
    const auto derived = recorder->derived();
    const auto& m = raw.at("mass");
    const auto& e = raw.at("energy");
    sum["mass_initial"] = m.front();
    sum["mass_final"] = m.back();
    sum["energy_initial"] = e.front();
    sum["energy_final"] = e.back();
    sum["mass_residual_max"] = max_abs(derived.at("mass_residual"));
    sum["energy_residual_max"] = max_abs(derived.at("energy_residual"));
    double two_form = 0.0;
    const auto& r1 = derived.at("energy_residual");
    const auto& r2 = derived.at("energy_residual_flux");
    for (std::size_t i = 0; i < r1.size(); ++i)
      two_form = std::max(two_form, std::abs(r1.values()[i] - r2.values()[i]));
    sum["energy_two_form_gap"] = two_form;
    if (derived.count("morawetz_residual")) {
      const auto mr = morawetz_rate_residual(raw.at("virial"), raw.at("virial_rhs"), &raw.at("perturbation_proxy"));
      sum["morawetz_residual_max"] = mr.max_abs;
      sum["morawetz_fitted_c"] = mr.fitted_c;
    }
    if (derived.count("lambda")) {
      const auto& lam = derived.at("lambda");
      bool monotone = true;
      for (std::size_t i = 1; i < lam.size(); ++i) monotone = monotone && lam.values()[i] >= lam.values()[i - 1];
      sum["lambda_monotone"] = monotone;
      const double c0 = energy_lambda_constant(recorder->lap_g_a(), recorder->weights());
      const auto bound = energy_lambda_bound_check(e, lam, c0, 1e-9);
      sum["energy_lambda"] = {{"c0", number(c0)},
                              {"holds", bound.holds},
                              {"worst_margin", number(bound.worst_margin)},
                              {"worst_time", bound.worst_time}};
    }
    const auto l4 = tail_verdict(derived.at("l4_integral"));
    sum["l4_integral"] = {{"total", l4.total}, {"last_quarter", l4.last_quarter}, {"bounded", l4.bounded}};
    if (derived.count("local_energy_integral")) {
      const auto loc = tail_verdict(derived.at("local_energy_integral"));
      sum["local_energy_integral"] = {
          {"total", loc.total}, {"last_quarter", loc.last_quarter}, {"bounded", loc.bounded}};
    }
    if (raw.count("bilinear_B")) {
      const auto ir = interaction_inequality_check(raw.at("bilinear_B"), derived.at("l4_integral"),
                                                   derived.at("damping_region_integral"), 1e-6);
      sum["interaction"] = {{"holds", ir.holds},
                            {"fitted_c", ir.fitted_c},
                            {"four_pi_l4", ir.lhs},
                            {"delta_B", ir.delta_b}};
    }
  }
  out.finish("complete");
  if (!opts.quiet) std::cout << out.summary().dump(2) << "\n";
  return exit_ok;
}

// -------------------------------------------------------------- rays

int rays_command(const CliOptions& opts) {
  const RunConfig cfg = parse_config(opts.config);
  RunOutput out(output_dir(opts, cfg), "rays", cfg, "manifest.json");
  const int dim = cfg.grid.dim;
  const MetricModel g(dim, cfg.preset, cfg.geometry);
  const DampingModel a(cfg.geometry);
  const double r_escape = cfg.rays.r_escape > 0.0 ? cfg.rays.r_escape : default_escape_radius(g, a);
  const EnsembleSummary sum =
      verify_exterior_control(ensemble_spec(cfg), dim, g, a, cfg.rays.horizon, cfg.rays.dt, r_escape,
                              cfg.geometry.a_min);

  std::ostringstream csv;
  for (int d = 0; d < dim; ++d) csv << "x0_" << d << ",";
  for (int d = 0; d < dim; ++d) csv << "xi0_" << d << ",";
  csv << "fate,t_exit_or_hit,time_in_control,hamiltonian_drift\n";
  for (const auto& r : sum.rays) {
    for (int d = 0; d < dim; ++d) csv << fmt(r.x0[d]) << ",";
    for (int d = 0; d < dim; ++d) csv << fmt(r.xi0[d]) << ",";
    const double t = r.fate.kind == FateKind::escaped ? r.fate.t_exit : r.fate.t_first_hit;
    csv << to_string(r.fate.kind) << "," << fmt(t) << "," << fmt(r.fate.time_in_control) << ","
        << fmt(r.fate.hamiltonian_drift) << "\n";
  }
  out.text("rays.csv", csv.str(), "rays");

  json& s = out.summary();
  s["rays"] = sum.rays.size();
  s["escaped"] = sum.escaped;
  s["controlled"] = sum.controlled;
  s["trapped"] = sum.trapped;
  s["max_hamiltonian_drift"] = sum.max_hamiltonian_drift;
  s["r_escape"] = r_escape;
  s["horizon"] = cfg.rays.horizon;
  s["exterior_control_holds"] = sum.exterior_control_holds();
  out.finish("complete");
  if (!opts.quiet) std::cout << s.dump(2) << "\n";
  return opts.strict && !sum.exterior_control_holds() ? exit_verdict : exit_ok;
}

// -------------------------------------------------------------- check-geometry

int check_geometry_command(const CliOptions& opts) {
  const RunConfig cfg = parse_config(opts.config);
  RunOutput out(output_dir(opts, cfg), "check-geometry", cfg, "manifest.json");
  const Geometry geo = build_preset(cfg.preset, cfg.geometry, cfg.grid);
  const ControlReport rep = check_control(geo.metric, geo.damping, cfg.geometry.g_tol, cfg.geometry.a_min);

  json report;
  report["preset"] = to_string(cfg.preset);
  report["control"] = control_json(rep);
  json viol = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(rep.violations.size(), 64); ++i) {
    const auto& v = rep.violations[i];
    viol.push_back(json::array({v[0], v[1], v[2]}));
  }
  report["violation_sample"] = viol;
  report["coercivity_constant"] = coercivity_constant(geo.metric);
  report["perturbation_sup"] = perturbation_sup(geo.metric);
  report["metric_support_radius"] = geo.metric.model.support_radius();
  report["damping_support_radius"] = geo.damping.model.support_radius();
  report["gradient_bound_constant_eps_0.01"] = gradient_bound_constant(geo.damping, 0.01);
  const WeightTables w = weight_tables(cfg.grid);
  report["energy_lambda_constant"] = number(energy_lambda_constant(metric_laplacian_of(geo.damping, geo.metric), w));
  out.text("geometry.json", report.dump(2) + "\n", "report");
  out.summary() = report;
  out.finish("complete");
  if (!opts.quiet) std::cout << report.dump(2) << "\n";
  return opts.strict && !rep.satisfied ? exit_verdict : exit_ok;
}

// -------------------------------------------------------------- scatter

int scatter_command(const CliOptions& opts) {
  const fs::path manifest_path = opts.manifest ? *opts.manifest : opts.config;
  if (manifest_path.empty()) throw ConfigError("scatter needs --manifest pointing at a simulate manifest.json");
  std::ifstream is(manifest_path);
  if (!is) throw ConfigError("cannot read manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  const fs::path run_dir = manifest_path.parent_path();
  if (manifest.value("subcommand", "") != "simulate") throw ConfigError("manifest is not from a simulate run");
  const RunConfig cfg = parse_config(run_dir / "config.ini");

  std::vector<std::pair<double, std::string>> chosen;
  for (const auto& s : manifest["snapshots"])
    if (s["role"] == "scatter") chosen.emplace_back(s["time"].get<double>(), s["path"].get<std::string>());
  if (chosen.size() < 3) {
    chosen.clear();
    for (const auto& s : manifest["snapshots"])
      if (s["role"] != "last_good") chosen.emplace_back(s["time"].get<double>(), s["path"].get<std::string>());
  }
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end(),
                           [](const auto& x, const auto& y) { return x.first == y.first; }),
               chosen.end());

  std::vector<Field> snaps;
  std::vector<double> times;
  for (const auto& [t, rel] : chosen) {
    SnapshotData d = read_snapshot(run_dir / rel);
    snaps.push_back(std::move(d.u));
    times.push_back(d.time);
  }
  ScatterReport rep = cauchy_scan(snaps, times, cfg.scattering.s_list, cfg.scattering.tol_mono);
  extract_profile(rep, snaps);

  RunOutput out(opts.out ? *opts.out : run_dir, "scatter", cfg, "scatter_manifest.json");
  for (std::size_t k = 0; k < rep.s_list.size(); ++k) {
    std::ostringstream csv;
    csv << "t";
    for (double t : rep.times) csv << "," << fmt(t);
    csv << "\n";
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
      csv << fmt(rep.times[i]);
      for (std::size_t j = 0; j < rep.times.size(); ++j) csv << "," << fmt(rep.cauchy[k][i][j]);
      csv << "\n";
    }
    char name[64];
    std::snprintf(name, sizeof name, "cauchy_s%g.csv", rep.s_list[k]);
    out.text(name, csv.str(), "cauchy");
  }
  std::ostringstream mm;
  mm << "t";
  for (double s : rep.s_list) mm << ",s" << fmt(s);
  mm << "\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    mm << fmt(rep.times[i]);
    for (std::size_t k = 0; k < rep.s_list.size(); ++k) mm << "," << fmt(rep.mismatch[k][i]);
    mm << "\n";
  }
  out.text("mismatch.csv", mm.str(), "mismatch");
  out.snapshot("u_plus.dnls", *rep.profile, rep.times.back(), 0, "profile");

  json verdicts = json::array();
  for (std::size_t k = 0; k < rep.s_list.size(); ++k)
    verdicts.push_back({{"s", rep.s_list[k]},
                        {"scattering_consistent", static_cast<bool>(rep.verdict[k])},
                        {"profile_norm", rep.profile_norm[k]},
                        {"final_mismatch", rep.mismatch[k].back()}});
  out.summary()["source_manifest"] = manifest_path.string();
  out.summary()["snapshot_times"] = rep.times;
  out.summary()["verdicts"] = verdicts;
  out.finish("complete");
  if (!opts.quiet) std::cout << out.summary().dump(2) << "\n";
  bool all = std::all_of(rep.verdict.begin(), rep.verdict.end(), [](bool b) { return b; });
  return opts.strict && !all ? exit_verdict : exit_ok;
}

}  // namespace

int run_subcommand(const std::string& name, const CliOptions& opts) {
  if (name == "simulate") return simulate_command(opts);
  if (name == "rays") return rays_command(opts);
  if (name == "check-geometry") return check_geometry_command(opts);
  if (name == "scatter") return scatter_command(opts);
  throw ConfigError("unknown subcommand '" + name + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const StructuralError*>(&e) || dynamic_cast<const InvalidMetricError*>(&e))
    return exit_config;
  if (dynamic_cast<const StabilityError*>(&e)) return exit_stability;
  return exit_other;
}

}  // namespace dnls
