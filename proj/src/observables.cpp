#include "dnls/observables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dnls/errors.hpp"

namespace dnls {

// --------------------------------------------------------------- series

void ObservableSeries::push(double t, double v) {
  if (!std::isfinite(t) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "series '" << name_ << "': non-finite record at t = " << t;
    throw StabilityError(os.str());
  }
  if (!t_.empty() && !(t > t_.back())) {
    std::ostringstream os;
    os << "series '" << name_ << "': time stamp " << t << " does not advance past " << t_.back();
    throw StructuralError(os.str());
  }
  t_.push_back(t);
  v_.push_back(v);
}

ObservableSeries ObservableSeries::cumulative(const std::string& name) const {
  ObservableSeries out(name);
  double acc = 0.0;
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (i > 0) acc += 0.5 * (t_[i] - t_[i - 1]) * (v_[i] + v_[i - 1]);
    out.push(t_[i], acc);
  }
  return out;
}

double ObservableSeries::at(double t) const {
  if (t_.empty()) throw StructuralError("series '" + name_ + "' is empty");
  if (t <= t_.front()) return v_.front();
  if (t >= t_.back()) return v_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_.begin());
  const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
  return (1.0 - w) * v_[i - 1] + w * v_[i];
}

void require_aligned(const ObservableSeries& a, const ObservableSeries& b) {
  if (a.times() != b.times())
    throw StructuralError("series '" + a.name() + "' and '" + b.name() + "' have different time stamps");
}

void write_csv(const std::filesystem::path& path, const ObservableSeries& s) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "t,value\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.times()[i], s.values()[i]);
    os << buf;
  }
}

// --------------------------------------------------------------- functionals

namespace {

// sum_ij T_ij Re(d_i u conj(d_j u)) at point p
double quadratic_form(const SymmetricTensorField& t, std::span<const Field> grad, std::size_t p) {
  const int dim = t.dim();
  double acc = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      acc += t(p, i, j) * (grad[i][p] * std::conj(grad[j][p])).real();
  return acc;
}

double grad_squared(std::span<const Field> grad, std::size_t p) {
  double acc = 0.0;
  for (const auto& g : grad) acc += std::norm(g[p]);
  return acc;
}

void require_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw StructuralError("fields live on different grids");
}

void require_gradient(const Field& u, std::span<const Field> grad) {
  if (grad.size() != static_cast<std::size_t>(u.spec().dim)) throw StructuralError("gradient has wrong rank");
  for (const auto& g : grad) require_grid(u.spec(), g.spec());
}

}  // namespace

std::vector<RealGrid> real_gradient(std::span<const double> f, const GridSpec& spec) {
  std::vector<RealGrid> out;
  for (const auto& g : gradient(Field::from_real(spec, f))) {
    RealGrid comp(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) comp[p] = g[p].real();
    out.push_back(std::move(comp));
  }
  return out;
}

double mass(const Field& u) {
  double acc = 0.0;
  for (const auto& v : u.values()) acc += std::norm(v);
  return acc * u.spec().cell_volume();
}

double energy(const Field& u, const MetricField& g) { return energy(u, g, gradient(u)); }

double energy(const Field& u, const MetricField& g, std::span<const Field> grad) {
  require_grid(u.spec(), g.spec());
  require_gradient(u, grad);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    const double m = std::norm(u[p]);
    acc += 0.5 * quadratic_form(g.samples, grad, p) + 0.25 * m * m;
  }
  return acc * u.spec().cell_volume();
}

double damping_mass_rate(const Field& u, const DampingField& a) {
  require_grid(u.spec(), a.spec);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) acc += a.values[p] * std::norm(u[p]);
  return acc * u.spec().cell_volume();
}

double damping_energy_rate(const Field& u, const DampingField& a, const MetricField& g) {
  return damping_energy_rate(u, a, g, gradient(u));
}

double damping_energy_rate(const Field& u, const DampingField& a, const MetricField& g,
                           std::span<const Field> grad) {
  require_grid(u.spec(), a.spec);
  require_grid(u.spec(), g.spec());
  require_gradient(u, grad);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (a.values[p] == 0.0) continue;
    const double m = std::norm(u[p]);
    acc += a.values[p] * (m * m + quadratic_form(g.samples, grad, p));
  }
  return acc * u.spec().cell_volume();
}

double metric_source_term(const Field& u, std::span<const double> lap_g_a) {
  if (lap_g_a.size() != u.size()) throw StructuralError("source table does not match field");
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) acc += std::norm(u[p]) * lap_g_a[p];
  return acc * u.spec().cell_volume();
}

double damping_flux_term(const Field& u, const DampingField& a, const MetricField& g) {
  require_grid(u.spec(), a.spec);
  return damping_flux_term(u, real_gradient(a.values, a.spec), g, gradient(u));
}

double damping_flux_term(const Field& u, std::span<const RealGrid> grad_a, const MetricField& g,
                         std::span<const Field> grad) {
  require_grid(u.spec(), g.spec());
  require_gradient(u, grad);
  const int dim = u.spec().dim;
  if (grad_a.size() != static_cast<std::size_t>(dim)) throw StructuralError("damping gradient has wrong rank");
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    const cplx ub = std::conj(u[p]);
    for (int i = 0; i < dim; ++i) {
      if (grad_a[i][p] == 0.0) continue;
      for (int j = 0; j < dim; ++j) acc += g.samples(p, i, j) * (grad[j][p] * ub).real() * grad_a[i][p];
    }
  }
  return acc * u.spec().cell_volume();
}

double morawetz_virial(const Field& u, const WeightTables& w) {
  return morawetz_virial(u, w, gradient(u));
}

double morawetz_virial(const Field& u, const WeightTables& w, std::span<const Field> grad) {
  require_grid(u.spec(), w.spec);
  require_gradient(u, grad);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    cplx dot = 0.0;
    for (int j = 0; j < u.spec().dim; ++j) dot += grad[j][p] * w.grad_chi[j][p];
    acc += (std::conj(u[p]) * dot).imag();
  }
  return acc * u.spec().cell_volume();
}

double morawetz_rate(const Field& u, const WeightTables& w, const DampingField& a) {
  return morawetz_rate(u, w, a, gradient(u));
}

double morawetz_rate(const Field& u, const WeightTables& w, const DampingField& a,
                     std::span<const Field> grad) {
  require_grid(u.spec(), w.spec);
  require_grid(u.spec(), a.spec);
  require_gradient(u, grad);
  const int dim = u.spec().dim;
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    double hess = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        hess += w.hess_chi[i * dim + j][p] * (grad[i][p] * std::conj(grad[j][p])).real();
    const double m = std::norm(u[p]);
    double value = 2.0 * hess - 0.5 * w.bilap_chi[p] * m + 0.5 * w.lap_chi[p] * m * m;
    if (a.values[p] != 0.0) {
      cplx dot = 0.0;
      for (int j = 0; j < dim; ++j) dot += grad[j][p] * w.grad_chi[j][p];
      value -= 2.0 * a.values[p] * (std::conj(u[p]) * dot).imag();
    }
    acc += value;
  }
  return acc * u.spec().cell_volume();
}

double perturbation_proxy(const Field& u, const MetricField& g, double g_tol) {
  if (g.identity) return 0.0;
  return perturbation_proxy(u, g, g_tol, gradient(u));
}

double perturbation_proxy(const Field& u, const MetricField& g, double g_tol,
                          std::span<const Field> grad) {
  require_grid(u.spec(), g.spec());
  if (g.identity) return 0.0;
  require_gradient(u, grad);
  const int dim = u.spec().dim;
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    double frob = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) frob += g.perturbation(p, i, j) * g.perturbation(p, i, j);
    if (std::sqrt(frob) <= g_tol) continue;
    const double m = std::norm(u[p]);
    acc += grad_squared(grad, p) + m + m * m;
  }
  return acc * u.spec().cell_volume();
}

double damping_region_energy(const Field& u, const DampingField& a, double a_min,
                             std::span<const Field> grad) {
  require_grid(u.spec(), a.spec);
  require_gradient(u, grad);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p)
    if (a.values[p] > a_min) acc += grad_squared(grad, p) + std::norm(u[p]);
  return acc * u.spec().cell_volume();
}

double lambda_integrand(const Field& u, const WeightTables& w) {
  require_grid(u.spec(), w.spec);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) acc -= w.bilap_chi[p] * std::norm(u[p]);
  return acc * u.spec().cell_volume();
}

double l4_power(const Field& u) {
  double acc = 0.0;
  for (const auto& v : u.values()) {
    const double m = std::norm(v);
    acc += m * m;
  }
  return acc * u.spec().cell_volume();
}

double local_energy(const Field& u, double radius) {
  return localized_integral(u, radius, LocalMode::energy);
}

double bilinear_B(const Field& u, const WeightTables& w) {
  require_grid(u.spec(), w.spec);
  const GridSpec& spec = u.spec();
  const int dim = spec.dim;
  const int n = spec.n;
  const Spectral& fft = spectral(spec);
  const double dv = spec.cell_volume();

  std::vector<cplx> density(u.size());
  for (std::size_t p = 0; p < u.size(); ++p) density[p] = std::norm(u[p]);
  fft.forward(density);

  // displacement index m sits at table index (m + n/2) mod n on every axis
  auto table_index = [&](std::size_t flat) {
    const auto idx = spec.index(flat);
    std::size_t q = 0;
    for (int d = 0; d < dim; ++d) q = q * n + static_cast<std::size_t>((idx[d] + n / 2) % n);
    return q;
  };
  std::vector<std::size_t> shift(u.size());
  for (std::size_t p = 0; p < u.size(); ++p) shift[p] = table_index(p);

  const auto grad = gradient(u);
  double acc = 0.0;
  std::vector<cplx> conv(u.size());
  for (int j = 0; j < dim; ++j) {
    for (std::size_t p = 0; p < u.size(); ++p) conv[p] = w.grad_rho[j][shift[p]];
    fft.forward(conv);
    for (std::size_t p = 0; p < u.size(); ++p) conv[p] *= density[p];
    fft.inverse(conv);
    for (std::size_t p = 0; p < u.size(); ++p)
      acc += (std::conj(u[p]) * grad[j][p]).imag() * conv[p].real();
  }
  return acc * dv * dv;
}

double local_sobolev_decay(const Field& u, std::span<const double> chi_cut, double s) {
  if (!(s >= 0.0) || !(s < 1.0)) throw DomainError("local Sobolev decay needs 0 <= s < 1");
  return sobolev_norm(multiply(u, chi_cut), s);
}

// --------------------------------------------------------------- residuals

ObservableSeries mass_law_residual(const ObservableSeries& m, const ObservableSeries& a_mass) {
  require_aligned(m, a_mass);
  const ObservableSeries loss = a_mass.cumulative("damping_mass");
  ObservableSeries r("mass_residual");
  for (std::size_t i = 0; i < m.size(); ++i)
    r.push(m.times()[i], m.values()[i] - m.front() + 2.0 * loss.values()[i]);
  return r;
}

ObservableSeries energy_law_residual(const ObservableSeries& e, const ObservableSeries& a_energy,
                                     const ObservableSeries& source) {
  require_aligned(e, a_energy);
  require_aligned(e, source);
  const ObservableSeries loss = a_energy.cumulative("damping_energy");
  const ObservableSeries src = source.cumulative("source");
  ObservableSeries r("energy_residual");
  for (std::size_t i = 0; i < e.size(); ++i)
    r.push(e.times()[i], e.values()[i] - e.front() + loss.values()[i] + src.values()[i]);
  return r;
}

MorawetzResidual morawetz_rate_residual(const ObservableSeries& v, const ObservableSeries& rhs,
                                        const ObservableSeries* proxy) {
  require_aligned(v, rhs);
  if (proxy) require_aligned(v, *proxy);
  if (v.size() < 5)
    throw DomainError(
        "virial rate check needs at least 5 records; record the virial every step (record_every = 1)");
  MorawetzResidual out{ObservableSeries("morawetz_residual"), 0.0, 0.0};
  const auto& t = v.times();
  const auto& f = v.values();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    const double rate = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] +
                        h1 / (h2 * (h1 + h2)) * f[i + 1];
    const double r = rate - rhs.values()[i];
    out.residual.push(t[i], r);
    out.max_abs = std::max(out.max_abs, std::abs(r));
    if (proxy) {
      const double q = proxy->values()[i];
      num += std::abs(r) * q;
      den += q * q;
    }
  }
  if (den > 0.0) out.fitted_c = num / den;
  return out;
}

ObservableSeries lambda_accumulator(const ObservableSeries& integrand) {
  return integrand.cumulative("lambda");
}

double energy_lambda_constant(std::span<const double> lap_g_a, const WeightTables& w) {
  if (lap_g_a.size() != w.bilap_chi.size()) throw StructuralError("source table does not match weights");
  double c = 0.0;
  for (std::size_t p = 0; p < lap_g_a.size(); ++p) {
    if (lap_g_a[p] == 0.0) continue;
    const double weight = -w.bilap_chi[p];
    if (weight <= 0.0) return std::numeric_limits<double>::infinity();
    c = std::max(c, std::abs(lap_g_a[p]) / weight);
  }
  return 0.5 * c;
}

BoundReport energy_lambda_bound_check(const ObservableSeries& e, const ObservableSeries& lambda,
                                      double c0, double tol) {
  require_aligned(e, lambda);
  BoundReport rep{true, c0, std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double l = lambda.values()[i];
    // C0 * 0 is taken as 0 even for an infinite constant
    const double allowance = l == 0.0 ? 0.0 : c0 * l;
    const double margin = e.front() + allowance + tol - e.values()[i];
    if (std::isnan(margin) || margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_time = e.times()[i];
    }
  }
  rep.holds = !std::isnan(rep.worst_margin) && rep.worst_margin >= 0.0;
  return rep;
}

TailReport tail_verdict(const ObservableSeries& cumulative, double fraction) {
  if (cumulative.size() < 2) throw DomainError("tail verdict needs at least 2 records");
  TailReport rep;
  const double t0 = cumulative.times().front();
  const double t1 = cumulative.times().back();
  rep.total = cumulative.back() - cumulative.front();
  rep.last_quarter = cumulative.back() - cumulative.at(t0 + 0.75 * (t1 - t0));
  rep.bounded = rep.total == 0.0 ? true : std::abs(rep.last_quarter) < fraction * std::abs(rep.total);
  return rep;
}

InteractionReport interaction_inequality_check(const ObservableSeries& b,
                                               const ObservableSeries& l4_cumulative,
                                               const ObservableSeries& local_cumulative,
                                               double tol) {
  if (b.empty()) throw DomainError("interaction check needs recorded B values");
  InteractionReport rep;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double t = b.times()[i];
    const double lhs = 4.0 * std::numbers::pi * l4_cumulative.at(t);
    const double db = b.values()[i] - b.front();
    const double excess = lhs - db - tol;
    rep.worst_slack = std::min(rep.worst_slack, -excess);
    if (excess <= 0.0) continue;
    const double loc = local_cumulative.at(t);
    if (loc <= 0.0) {
      rep.holds = false;
      continue;
    }
    rep.fitted_c = std::max(rep.fitted_c, excess / loc);
  }
  rep.lhs = 4.0 * std::numbers::pi * l4_cumulative.at(b.times().back());
  rep.delta_b = b.back() - b.front();
  return rep;
}

Field probe_direction(const GridSpec& spec) {
  const double sigma = spec.half_length / 8.0;
  Field phi = Field::from_function(spec, [&](const Vec3& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return std::exp(-0.5 * r2 / (sigma * sigma)) * cplx(1.0, 0.5 * x[0] / sigma);
  });
  phi *= 1.0 / l2_norm(phi);
  return phi;
}

StabilityReport stability_probe(const Field& u0, double delta, const Geometry& geo,
                                const SolverConfig& cfg) {
  if (!(delta >= 0.0)) throw DomainError("probe amplitude must be >= 0");
  cfg.validate();
  StabilityReport rep{delta, 0.0, 0.0};
  Field perturbed = u0 + cplx(delta) * probe_direction(u0.spec());
  const long steps = std::lround(std::abs(cfg.T) / cfg.dt);
  SolverConfig local = cfg;
  local.dt = std::abs(cfg.T) / steps;
  SimulationState a{u0, 0.0, 0};
  SimulationState b{std::move(perturbed), 0.0, 0};
  rep.sup_difference = l2_norm(b.u - a.u);
  for (long n = 0; n < steps; ++n) {
    a = step(a, geo, local);
    b = step(b, geo, local);
    rep.sup_difference = std::max(rep.sup_difference, l2_norm(b.u - a.u));
  }
  rep.amplification = delta > 0.0 ? rep.sup_difference / delta : 0.0;
  return rep;
}

}  // namespace dnls
