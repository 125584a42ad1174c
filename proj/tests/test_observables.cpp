#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "dnls/errors.hpp"
#include "dnls/observables.hpp"

using namespace dnls;
using std::numbers::pi;

namespace {

Geometry free_geometry(const GridSpec& spec) {
  GeometryParams p = preset_defaults(Preset::identity);
  p.damping_amplitude = 0.0;
  return build_preset(Preset::identity, p, spec);
}

Field gaussian(const GridSpec& spec, double amp, double sigma, Vec3 center = {0, 0, 0}, double px = 0.0) {
  return Field::from_function(spec, [=](const Vec3& x) {
    double r2 = 0.0;
    for (int d = 0; d < 3; ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
    return amp * std::exp(-0.5 * r2 / (sigma * sigma)) * std::polar(1.0, px * x[0]);
  });
}

ObservableSeries sampled(const std::string& name, const std::vector<double>& t, auto fn) {
  ObservableSeries s(name);
  for (double v : t) s.push(v, fn(v));
  return s;
}

std::vector<double> uniform_stamps(double t0, double t1, int n) {
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = t0 + (t1 - t0) * i / n;
  return t;
}

}  // namespace

TEST_CASE("series bookkeeping") {
  ObservableSeries s("x");
  s.push(0.0, 1.0);
  s.push(0.5, 2.0);
  CHECK_THROWS_AS(s.push(0.5, 3.0), StructuralError);
  CHECK_THROWS_AS(s.push(1.0, std::nan("")), StabilityError);
  CHECK(s.size() == 2);
  CHECK(s.at(0.25) == doctest::Approx(1.5));
  CHECK(s.at(-1.0) == 1.0);
  CHECK(s.at(9.0) == 2.0);
  CHECK_THROWS_AS(ObservableSeries("e").at(0.0), StructuralError);

  ObservableSeries other("y");
  other.push(0.0, 0.0);
  other.push(0.6, 0.0);
  CHECK_THROWS_AS(require_aligned(s, other), StructuralError);
}

TEST_CASE("cumulative integral and interpolation error bounds") {
  const auto t = uniform_stamps(0.0, 2.0, 40);
  const double h = 0.05;
  const ObservableSeries f = sampled("f", t, [](double x) { return std::sin(x); });
  const ObservableSeries c = f.cumulative("F");
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(std::abs(c.values()[i] - (1.0 - std::cos(t[i]))) <= t[i] * h * h / 12.0 + 1e-15);
  // linear interpolation error <= h^2/8 max|f''|
  for (double x = 0.0; x < 2.0; x += 0.013)
    CHECK(std::abs(f.at(x) - std::sin(x)) <= h * h / 8.0 + 1e-15);
}

TEST_CASE("csv output") {
  ObservableSeries s("x");
  s.push(0.1, 1.0 / 3.0);
  s.push(0.2, -2.5e-300);
  const auto path = std::filesystem::temp_directory_path() / "dnls_series.csv";
  write_csv(path, s);
  std::ifstream is(path);
  std::string header, l1, l2;
  std::getline(is, header);
  std::getline(is, l1);
  std::getline(is, l2);
  CHECK(header == "t,value");
  CHECK(std::stod(l1.substr(l1.find(',') + 1)) == 1.0 / 3.0);
  CHECK(std::stod(l2.substr(l2.find(',') + 1)) == -2.5e-300);
  std::filesystem::remove(path);
}

TEST_CASE("Gaussian integrals") {
  for (int dim = 1; dim <= 3; ++dim) {
    const GridSpec spec{dim, dim == 3 ? 64 : 128, 8.0};
    const double A = 0.7, s = 1.1;
    const Field u = gaussian(spec, A, s);
    const double m = A * A * std::pow(pi, 0.5 * dim) * std::pow(s, dim);
    CHECK(mass(u) == doctest::Approx(m).epsilon(1e-12));
    const double l4 = std::pow(A, 4) * std::pow(pi, 0.5 * dim) * std::pow(s / std::sqrt(2.0), dim);
    CHECK(l4_power(u) == doctest::Approx(l4).epsilon(1e-12));
    const double grad2 = m * dim / (2.0 * s * s);
    const Geometry geo = free_geometry(spec);
    CHECK(energy(u, geo.metric) == doctest::Approx(0.5 * grad2 + 0.25 * l4).epsilon(1e-10));
  }
}

TEST_CASE("energy scales with the metric") {
  const GridSpec spec{2, 64, 8.0};
  const Field u = gaussian(spec, 0.5, 1.0, {0.5, 0.0, 0.0}, 0.7);
  const Geometry flat = free_geometry(spec);
  MetricField twice = flat.metric;
  for (std::size_t p = 0; p < spec.size(); ++p)
    for (int i = 0; i < 2; ++i) twice.samples.set(p, i, i, 2.0);
  twice.identity = false;
  const double kin = energy(u, flat.metric) - 0.25 * l4_power(u);
  CHECK(energy(u, twice) - 0.25 * l4_power(u) == doctest::Approx(2.0 * kin).epsilon(1e-12));
}

TEST_CASE("damping functionals") {
  const GridSpec spec{2, 64, 8.0};
  GeometryParams p = preset_defaults(Preset::identity);
  p.damping_amplitude = 0.3;
  p.damping_outer = 1.0;
  p.damping_width = 3.0;
  const Geometry geo = build_preset(Preset::identity, p, spec);
  const Field u = gaussian(spec, 0.8, 1.5, {0.5, -0.3, 0.0}, 0.4);
  double direct = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) direct += geo.damping.values[i] * std::norm(u[i]);
  CHECK(damping_mass_rate(u, geo.damping) == doctest::Approx(direct * spec.cell_volume()));
  // Re int grad u . conj(u) grad a = -1/2 int |u|^2 Delta a
  const RealGrid lap = metric_laplacian_of(geo.damping, geo.metric);
  CHECK(damping_flux_term(u, geo.damping, geo.metric) ==
        doctest::Approx(-0.5 * metric_source_term(u, lap)).epsilon(1e-8));
  // constant damping: int a(|u|^4 + |grad u|^2) = a (l4 + 2 E_kin)
  DampingField flat_a = geo.damping;
  std::fill(flat_a.values.begin(), flat_a.values.end(), 0.3);
  const double kin = energy(u, geo.metric) - 0.25 * l4_power(u);
  CHECK(damping_energy_rate(u, flat_a, geo.metric) == doctest::Approx(0.3 * (l4_power(u) + 2.0 * kin)));
}

TEST_CASE("virial of a boosted Gaussian") {
  const GridSpec spec{2, 64, 8.0};
  const WeightTables w = weight_tables(spec);
  const Field real = gaussian(spec, 1.0, 1.0, {1.0, 0.5, 0.0});
  CHECK(std::abs(morawetz_virial(real, w)) < 1e-13);
  // Im(conj(u) grad u) = p |u|^2 e_x exactly
  const double px = 0.8;
  const Field boosted = gaussian(spec, 1.0, 1.0, {1.0, 0.5, 0.0}, px);
  double oracle = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) oracle += px * std::norm(boosted[i]) * w.grad_chi[0][i];
  CHECK(morawetz_virial(boosted, w) == doctest::Approx(oracle * spec.cell_volume()).epsilon(1e-10));
}

TEST_CASE("virial rate matches the free evolution") {
  const GridSpec spec{2, 64, 12.0};
  const Geometry geo = free_geometry(spec);
  const WeightTables w = weight_tables(spec);
  SolverConfig cfg;
  cfg.T = 0.3;
  cfg.dt = 0.005;
  ObservableSeries v("V"), rhs("R");
  Monitor m{1, [&](const SimulationState& s) {
              v.push(s.t, morawetz_virial(s.u, w));
              rhs.push(s.t, morawetz_rate(s.u, w, geo.damping));
            }};
  simulate(gaussian(spec, 0.8, 1.0, {0.5, 0.0, 0.0}, 0.6), 0.0, geo, cfg, std::span(&m, 1));
  const MorawetzResidual r = morawetz_rate_residual(v, rhs);
  double scale = 0.0;
  for (double x : rhs.values()) scale = std::max(scale, std::abs(x));
  CHECK(r.max_abs < 1e-3 * scale);
}

TEST_CASE("three-point rate on nonuniform stamps") {
  std::vector<double> t{0.0, 0.1, 0.25, 0.3, 0.45, 0.6, 0.62, 0.8};
  const ObservableSeries v = sampled("V", t, [](double x) { return std::sin(3.0 * x); });
  const ObservableSeries rhs = sampled("R", t, [](double x) { return 3.0 * std::cos(3.0 * x); });
  const MorawetzResidual r = morawetz_rate_residual(v, rhs);
  CHECK(r.residual.size() == t.size() - 2);
  CHECK(r.max_abs < 27.0 * 0.15 * 0.15 / 6.0 * 1.5);
  // exact for quadratics
  const ObservableSeries q = sampled("q", t, [](double x) { return x * x - x; });
  const ObservableSeries dq = sampled("dq", t, [](double x) { return 2.0 * x - 1.0; });
  CHECK(morawetz_rate_residual(q, dq).max_abs < 1e-12);
  const ObservableSeries proxy = sampled("p", t, [](double) { return 2.0; });
  CHECK(morawetz_rate_residual(q, dq, &proxy).fitted_c < 1e-12);

  const ObservableSeries short_v = sampled("V", {0.0, 0.1, 0.2, 0.3}, [](double x) { return x; });
  CHECK_THROWS_AS(morawetz_rate_residual(short_v, short_v), DomainError);
}

TEST_CASE("conservation-law residuals") {
  // M(t) = e^{-2ct} with int a|u|^2 = c M: the residual is pure quadrature error
  const auto t = uniform_stamps(0.0, 1.0, 100);
  const double c = 0.7;
  const ObservableSeries m = sampled("M", t, [&](double x) { return std::exp(-2.0 * c * x); });
  const ObservableSeries am = sampled("aM", t, [&](double x) { return c * std::exp(-2.0 * c * x); });
  const ObservableSeries r = mass_law_residual(m, am);
  for (double v : r.values()) CHECK(std::abs(v) < 2.0 * c * c * c * 4.0 * 1e-4 / 12.0 + 1e-15);

  const ObservableSeries e = sampled("E", t, [](double x) { return 1.0 - x * x; });
  const ObservableSeries ae = sampled("aE", t, [](double x) { return 3.0 * x; });
  const ObservableSeries src = sampled("s", t, [](double x) { return -x; });
  // E' = -2t = -(3t) - (-t)
  const ObservableSeries re = energy_law_residual(e, ae, src);
  for (double v : re.values()) CHECK(std::abs(v) < 1e-13);
}

TEST_CASE("lambda constant and bound check") {
  const GridSpec spec{3, 8, 4.0};
  const WeightTables w = weight_tables(spec);
  RealGrid lap(spec.size(), 0.0);
  CHECK(energy_lambda_constant(lap, w) == 0.0);
  lap[0] = 3.0;  // a corner, |x| = 4 sqrt 3
  const double chi = w.chi[0];
  CHECK(energy_lambda_constant(lap, w) == doctest::Approx(0.5 * 3.0 * std::pow(chi, 7) / 15.0));

  const GridSpec plane{2, 16, 4.0};
  const WeightTables w2 = weight_tables(plane);
  RealGrid far(plane.size(), 0.0);
  far[0] = 1.0;  // |x| = 4 sqrt 2, where -Delta^2 chi < 0 in two dimensions
  CHECK(w2.bilap_chi[0] > 0.0);
  CHECK(std::isinf(energy_lambda_constant(far, w2)));

  const auto t = uniform_stamps(0.0, 1.0, 10);
  const ObservableSeries e = sampled("E", t, [](double x) { return 1.0 + 0.5 * x; });
  const ObservableSeries lam = sampled("l", t, [](double x) { return x; });
  CHECK(energy_lambda_bound_check(e, lam, 0.6, 1e-9).holds);
  const BoundReport bad = energy_lambda_bound_check(e, lam, 0.4, 1e-9);
  CHECK_FALSE(bad.holds);
  CHECK(bad.worst_time == 1.0);
  CHECK(bad.worst_margin == doctest::Approx(-0.1));
  // infinite constant with lambda = 0: only the tolerance remains
  const ObservableSeries zero = sampled("z", t, [](double) { return 0.0; });
  const ObservableSeries flat = sampled("E", t, [](double) { return 1.0; });
  CHECK(energy_lambda_bound_check(flat, zero, std::numeric_limits<double>::infinity(), 1e-9).holds);
  CHECK(energy_lambda_bound_check(e, lam, std::numeric_limits<double>::infinity(), 1e-9).holds);
}

TEST_CASE("lambda integrand is positive in three dimensions") {
  const GridSpec spec{3, 16, 6.0};
  const WeightTables w = weight_tables(spec);
  const Field u = gaussian(spec, 1.0, 2.0, {1.0, 0.0, 0.0}, 0.5);
  CHECK(lambda_integrand(u, w) > 0.0);
  const ObservableSeries integrand = sampled("i", uniform_stamps(0, 1, 5), [](double x) { return 1.0 + x; });
  const ObservableSeries lam = lambda_accumulator(integrand);
  for (std::size_t i = 1; i < lam.size(); ++i) CHECK(lam.values()[i] > lam.values()[i - 1]);
}

TEST_CASE("tail verdict") {
  const auto t = uniform_stamps(0.0, 40.0, 400);
  const ObservableSeries decaying = sampled("d", t, [](double x) { return std::exp(-0.5 * x); }).cumulative("D");
  CHECK(tail_verdict(decaying).bounded);
  const ObservableSeries constant = sampled("c", t, [](double) { return 1.0; }).cumulative("C");
  const TailReport r = tail_verdict(constant);
  CHECK_FALSE(r.bounded);
  CHECK(r.last_quarter == doctest::Approx(0.25 * r.total));
  CHECK(tail_verdict(sampled("z", t, [](double) { return 0.0; })).bounded);
}

TEST_CASE("bilinear functional matches the direct double sum") {
  const GridSpec spec{3, 16, 4.0};
  const WeightTables w = weight_tables(spec);
  const Field u = gaussian(spec, 1.0, 0.9, {0.4, -0.3, 0.2}, 0.9) +
                  gaussian(spec, 0.6, 0.7, {-1.0, 0.8, 0.0}, -0.5);
  const double fast = bilinear_B(u, w);

  const auto grad = gradient(u);
  const int n = spec.n;
  const double dx = spec.dx();
  std::vector<double> density(u.size());
  std::vector<std::array<double, 3>> current(u.size());
  for (std::size_t p = 0; p < u.size(); ++p) {
    density[p] = std::norm(u[p]);
    for (int j = 0; j < 3; ++j) current[p][j] = (std::conj(u[p]) * grad[j][p]).imag();
  }
  double slow = 0.0;
  for (std::size_t x = 0; x < u.size(); ++x) {
    const auto ix = spec.index(x);
    for (std::size_t y = 0; y < u.size(); ++y) {
      const auto iy = spec.index(y);
      // periodic displacement x - y in [-L, L)
      double d[3], r2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        int m = ((ix[k] - iy[k]) % n + n) % n;
        if (m >= n / 2) m -= n;
        d[k] = m * dx;
        r2 += d[k] * d[k];
      }
      if (r2 == 0.0) continue;
      const double r = std::sqrt(r2);
      slow += density[y] * (current[x][0] * d[0] + current[x][1] * d[1] + current[x][2] * d[2]) / r;
    }
  }
  slow *= spec.cell_volume() * spec.cell_volume();
  CHECK(std::abs(fast - slow) <= 1e-6 * std::abs(slow));
  CHECK(std::abs(slow) > 1e-3);

  CHECK(std::abs(bilinear_B(gaussian(spec, 1.0, 1.0), w)) < 1e-14);
}

TEST_CASE("interaction inequality check") {
  const auto t = uniform_stamps(0.0, 1.0, 10);
  const ObservableSeries l4 = sampled("l4", t, [](double x) { return x; });
  const ObservableSeries b_ok = sampled("B", t, [](double x) { return 5.0 * pi * x; });
  const ObservableSeries loc = sampled("loc", t, [](double x) { return x; });
  const InteractionReport good = interaction_inequality_check(b_ok, l4, loc, 1e-9);
  CHECK(good.holds);
  CHECK(good.fitted_c == 0.0);
  CHECK(good.lhs == doctest::Approx(4.0 * pi));
  CHECK(good.delta_b == doctest::Approx(5.0 * pi));
  const ObservableSeries b_low = sampled("B", t, [](double x) { return 3.0 * pi * x; });
  const InteractionReport fit = interaction_inequality_check(b_low, l4, loc, 0.0);
  CHECK(fit.holds);
  CHECK(fit.fitted_c == doctest::Approx(pi));
  const ObservableSeries none = sampled("loc", t, [](double) { return 0.0; });
  CHECK_FALSE(interaction_inequality_check(b_low, l4, none, 0.0).holds);
}

TEST_CASE("local norms") {
  const GridSpec spec{2, 64, 8.0};
  const Field u = gaussian(spec, 1.0, 1.0);
  const RealGrid all(spec.size(), 1.0);
  CHECK(local_sobolev_decay(u, all, 0.0) == doctest::Approx(l2_norm(u)));
  CHECK(local_sobolev_decay(u, all, 0.5) > l2_norm(u));
  CHECK_THROWS_AS(local_sobolev_decay(u, all, 1.0), DomainError);
  CHECK(local_energy(u, 7.0) == doctest::Approx(mass(u) + 2.0 * (energy(u, free_geometry(spec).metric) - 0.25 * l4_power(u))).epsilon(1e-9));
}

TEST_CASE("stability probe is linear for small perturbations") {
  const GridSpec spec{2, 64, 10.0};
  const Geometry geo = build_preset(Preset::conformal_bump, preset_defaults(Preset::conformal_bump), spec);
  SolverConfig cfg;
  cfg.T = 0.5;
  cfg.dt = 0.01;
  const Field u0 = gaussian(spec, 0.5, 1.0);
  const Field phi = probe_direction(spec);
  CHECK(l2_norm(phi) == doctest::Approx(1.0));
  CHECK(stability_probe(u0, 0.0, geo, cfg).sup_difference == 0.0);
  const double a = stability_probe(u0, 1e-4, geo, cfg).sup_difference;
  const double b = stability_probe(u0, 5e-5, geo, cfg).sup_difference;
  CHECK(a / b == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(a >= 1e-4 * (1.0 - 1e-12));
  CHECK_THROWS_AS(stability_probe(u0, -1.0, geo, cfg), DomainError);
}
