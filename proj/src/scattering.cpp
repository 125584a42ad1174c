#include "dnls/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dnls/errors.hpp"

namespace dnls {

Field free_pullback(const Field& u, double t) { return free_evolve(u, -t); }

ScatterReport cauchy_scan(std::span<const Field> snapshots, std::span<const double> times,
                          std::span<const double> s_list, double tol_mono) {
  if (snapshots.size() != times.size()) throw StructuralError("snapshot and time counts differ");
  if (snapshots.size() < 3)
    throw DomainError("Cauchy scan needs at least 3 snapshots; add snapshot times to the run");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw StructuralError("snapshot times must increase");
  for (double s : s_list)
    if (!(s >= 0.0)) throw DomainError("Sobolev index must be >= 0");

  ScatterReport rep;
  rep.times.assign(times.begin(), times.end());
  rep.s_list.assign(s_list.begin(), s_list.end());
  const std::size_t n = snapshots.size();

  std::vector<Field> pulled;
  pulled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pulled.push_back(free_pullback(snapshots[i], times[i]));

  const double half = times.front() + 0.5 * (times.back() - times.front());
  for (double s : s_list) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = sobolev_norm(pulled[i] - pulled[j], s);

    std::vector<double> tail;
    for (std::size_t j = 0; j + 1 < n; ++j)
      if (times[j] >= half) tail.push_back(d[n - 1][j]);
    bool ok = tail.size() >= 2;
    for (std::size_t j = 1; ok && j < tail.size(); ++j) ok = tail[j] <= tail[j - 1] * (1.0 + tol_mono);
    // an identically converged run (all zero) is consistent as well
    if (!ok && !tail.empty() && std::all_of(tail.begin(), tail.end(), [](double x) { return x == 0.0; }))
      ok = true;
    rep.cauchy.push_back(std::move(d));
    rep.verdict.push_back(ok);
  }
  return rep;
}

void extract_profile(ScatterReport& rep, std::span<const Field> snapshots) {
  if (snapshots.size() != rep.times.size()) throw StructuralError("snapshots do not match the scan");
  rep.profile = free_pullback(snapshots.back(), rep.times.back());
  rep.mismatch.clear();
  rep.profile_norm.clear();
  for (double s : rep.s_list) {
    std::vector<double> row;
    for (std::size_t i = 0; i < snapshots.size(); ++i)
      row.push_back(sobolev_norm(snapshots[i] - free_evolve(*rep.profile, rep.times[i]), s));
    rep.mismatch.push_back(std::move(row));
    rep.profile_norm.push_back(sobolev_norm(*rep.profile, s));
  }
}

Cutoff cutoff_from_values(const GridSpec& spec, RealGrid values) {
  if (values.size() != spec.size()) throw StructuralError("cutoff does not match grid");
  Cutoff c{spec, std::move(values), {}, {}};
  const Field f = Field::from_real(spec, c.values);
  for (const auto& g : gradient(f)) {
    RealGrid comp(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) comp[p] = g[p].real();
    c.grad.push_back(std::move(comp));
  }
  const Field l = laplacian(f);
  c.lap.resize(l.size());
  for (std::size_t p = 0; p < l.size(); ++p) c.lap[p] = l[p].real();
  return c;
}

Cutoff make_cutoff(const GridSpec& spec, double radius, double width, const DampingField& a,
                   double a_min) {
  RealGrid values;
  try {
    values = radial_cutoff(spec, radius, width);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (a.values[p] > a_min && std::abs(values[p] - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "cutoff radius " << radius << " does not cover the damping region (a > " << a_min
         << " at |x| = " << norm(spec.position(p)) << ")";
      throw ConfigError(os.str());
    }
  }
  return cutoff_from_values(spec, std::move(values));
}

Field commutator(const Field& u, const Cutoff& chi) {
  if (!(u.spec() == chi.spec)) throw StructuralError("cutoff and field grids differ");
  const auto grad = gradient(u);
  Field out(u.spec());
  for (std::size_t p = 0; p < u.size(); ++p) {
    cplx acc = chi.lap[p] * u[p];
    for (int j = 0; j < u.spec().dim; ++j) acc += 2.0 * chi.grad[j][p] * grad[j][p];
    out[p] = acc;
  }
  return out;
}

CutoffRecord cutoff_diagnostics(const Field& u, const Cutoff& chi, std::span<const double> s_list) {
  CutoffRecord rec;
  rec.s_list.assign(s_list.begin(), s_list.end());
  const Field inside = multiply(u, chi.values);
  for (double s : s_list) rec.chi_u_norm.push_back(sobolev_norm(inside, s));
  rec.commutator_l2 = l2_norm(commutator(u, chi));
  rec.exterior_l2 = l2_norm(u - inside);
  return rec;
}

}  // namespace dnls
