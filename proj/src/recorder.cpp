#include "dnls/recorder.hpp"

#include <cstdio>

#include "dnls/errors.hpp"

namespace dnls {

std::string cutoff_series_name(double s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "chi_u_h%g", s);
  return buf;
}

RunRecorder::RunRecorder(const Geometry& geo, const ObservableConfig& cfg)
    : geo_(&geo),
      cfg_(cfg),
      weights_(weight_tables(geo.metric.spec())),
      lap_g_a_(metric_laplacian_of(geo.damping, geo.metric)),
      grad_a_(real_gradient(geo.damping.values, geo.damping.spec)) {
  if (cfg_.record_every < 1 || cfg_.bilinear_every < 1) throw DomainError("record cadences must be >= 1");
  if (cfg_.cutoff)
    cutoff_ = make_cutoff(geo.metric.spec(), cfg_.cutoff_radius, cfg_.cutoff_width, geo.damping,
                          geo.params.a_min);
}

std::vector<Monitor> RunRecorder::monitors() {
  std::vector<Monitor> out;
  out.push_back({cfg_.record_every, [this](const SimulationState& s) { record(s); }});
  if (cfg_.bilinear)
    out.push_back({cfg_.bilinear_every, [this](const SimulationState& s) { record_bilinear(s); }});
  return out;
}

void RunRecorder::push(const std::string& name, double t, double v) {
  auto it = raw_.find(name);
  if (it == raw_.end()) it = raw_.emplace(name, ObservableSeries(name)).first;
  it->second.push(t, v);
}

void RunRecorder::record(const SimulationState& s) {
  const Field& u = s.u;
  const Geometry& geo = *geo_;
  const double t = s.t;
  const auto grad = gradient(u);

  push("mass", t, mass(u));
  push("energy", t, energy(u, geo.metric, grad));
  push("damping_mass_rate", t, damping_mass_rate(u, geo.damping));
  push("damping_energy_rate", t, damping_energy_rate(u, geo.damping, geo.metric, grad));
  push("source_laplacian", t, -0.5 * metric_source_term(u, lap_g_a_));
  push("source_flux", t, damping_flux_term(u, grad_a_, geo.metric, grad));
  push("l4", t, l4_power(u));
  if (cfg_.morawetz) {
    push("virial", t, morawetz_virial(u, weights_, grad));
    push("virial_rhs", t, morawetz_rate(u, weights_, geo.damping, grad));
    push("perturbation_proxy", t, perturbation_proxy(u, geo.metric, geo.params.g_tol, grad));
  }
  if (cfg_.lambda) push("lambda_integrand", t, lambda_integrand(u, weights_));
  if (cfg_.local) {
    push("local_energy", t, localized_integral(u, cfg_.local_radius, LocalMode::energy));
    push("damping_region_energy", t, damping_region_energy(u, geo.damping, geo.params.a_min, grad));
  }
  if (cutoff_) {
    const CutoffRecord rec = cutoff_diagnostics(u, *cutoff_, cfg_.cutoff_s);
    for (std::size_t k = 0; k < rec.s_list.size(); ++k)
      push(cutoff_series_name(rec.s_list[k]), t, rec.chi_u_norm[k]);
    push("commutator_l2", t, rec.commutator_l2);
    push("exterior_l2", t, rec.exterior_l2);
  }
}

void RunRecorder::record_bilinear(const SimulationState& s) {
  push("bilinear_B", s.t, bilinear_B(s.u, weights_));
}

const ObservableSeries& RunRecorder::raw(const std::string& name) const {
  const auto it = raw_.find(name);
  if (it == raw_.end()) throw StructuralError("series '" + name + "' was not recorded");
  return it->second;
}

std::map<std::string, ObservableSeries> RunRecorder::derived() const {
  std::map<std::string, ObservableSeries> out;
  if (!has("mass")) return out;
  auto put = [&](ObservableSeries s, const std::string& name) {
    ObservableSeries renamed(name);
    for (std::size_t i = 0; i < s.size(); ++i) renamed.push(s.times()[i], s.values()[i]);
    out.emplace(name, std::move(renamed));
  };
  put(mass_law_residual(raw("mass"), raw("damping_mass_rate")), "mass_residual");
  put(energy_law_residual(raw("energy"), raw("damping_energy_rate"), raw("source_laplacian")),
      "energy_residual");
  put(energy_law_residual(raw("energy"), raw("damping_energy_rate"), raw("source_flux")),
      "energy_residual_flux");
  put(raw("l4").cumulative("l4_integral"), "l4_integral");
  if (has("virial") && raw("virial").size() >= 5) {
    const auto r = morawetz_rate_residual(raw("virial"), raw("virial_rhs"), &raw("perturbation_proxy"));
    put(r.residual, "morawetz_residual");
  }
  if (has("lambda_integrand")) put(lambda_accumulator(raw("lambda_integrand")), "lambda");
  if (has("local_energy")) {
    put(raw("local_energy").cumulative("x"), "local_energy_integral");
    put(raw("damping_region_energy").cumulative("x"), "damping_region_integral");
  }
  if (has("commutator_l2")) {
    ObservableSeries sq("commutator_sq");
    const auto& c = raw("commutator_l2");
    for (std::size_t i = 0; i < c.size(); ++i) sq.push(c.times()[i], c.values()[i] * c.values()[i]);
    put(sq.cumulative("x"), "commutator_sq_integral");
  }
  return out;
}

}  // namespace dnls
