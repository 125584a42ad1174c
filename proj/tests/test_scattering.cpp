#include <cmath>

#include "doctest.h"
#include "dnls/errors.hpp"
#include "dnls/scattering.hpp"

using namespace dnls;

namespace {

Field packet(const GridSpec& spec, double amp, double sigma, double cx, double px) {
  return Field::from_function(spec, [=](const Vec3& x) {
    const double r2 = (x[0] - cx) * (x[0] - cx) + x[1] * x[1] + x[2] * x[2];
    return amp * std::exp(-0.5 * r2 / (sigma * sigma)) * std::polar(1.0, px * x[0]);
  });
}

}  // namespace

TEST_CASE("pullback inverts the free flow") {
  const GridSpec spec{2, 32, 6.0};
  const Field u = packet(spec, 1.0, 1.0, 0.5, 1.0);
  const Field back = free_pullback(free_evolve(u, 0.8), 0.8);
  CHECK(l2_norm(back - u) < 1e-13 * l2_norm(u));
  // unitary in every H^s
  for (double s : default_s_list) CHECK(sobolev_norm(free_pullback(u, 2.0), s) == doctest::Approx(sobolev_norm(u, s)));
}

TEST_CASE("free snapshots have zero Cauchy differences and an exact profile") {
  const GridSpec spec{1, 64, 10.0};
  const Field u0 = packet(spec, 1.0, 1.0, 0.0, 0.5);
  const std::vector<double> t{1.0, 2.0, 3.0, 4.0};
  std::vector<Field> snaps;
  for (double ti : t) snaps.push_back(free_evolve(u0, ti));
  ScatterReport rep = cauchy_scan(snaps, t, default_s_list);
  REQUIRE(rep.cauchy.size() == default_s_list.size());
  for (const auto& k : rep.cauchy)
    for (const auto& row : k)
      for (double d : row) CHECK(d < 1e-12);
  extract_profile(rep, snaps);
  REQUIRE(rep.profile);
  CHECK(l2_norm(*rep.profile - u0) < 1e-12);
  for (const auto& row : rep.mismatch)
    for (double m : row) CHECK(m < 1e-12);
  CHECK(rep.profile_norm[0] == doctest::Approx(l2_norm(u0)));
}

TEST_CASE("Cauchy verdict follows the decay of the last row") {
  const GridSpec spec{1, 64, 10.0};
  const Field u0 = packet(spec, 1.0, 1.0, 0.0, 0.5);
  const Field phi = packet(spec, 0.3, 0.8, 1.0, -0.5);
  std::vector<double> t;
  for (int i = 1; i <= 8; ++i) t.push_back(i);
  auto build = [&](auto amplitude) {
    std::vector<Field> snaps;
    for (double ti : t) snaps.push_back(free_evolve(u0 + cplx(amplitude(ti)) * phi, ti));
    return snaps;
  };
  const std::vector<double> s{0.0, 0.5};
  const auto converging = build([](double x) { return std::exp(-0.5 * x); });
  const ScatterReport good = cauchy_scan(converging, t, s);
  CHECK(good.verdict[0]);
  CHECK(good.verdict[1]);
  // D[last][j] = |e^{-t_j/2} - e^{-4}| |phi|_{H^s}
  for (std::size_t j = 0; j + 1 < t.size(); ++j)
    CHECK(good.cauchy[0][t.size() - 1][j] ==
          doctest::Approx((std::exp(-0.5 * t[j]) - std::exp(-4.0)) * l2_norm(phi)).epsilon(1e-10));

  const auto oscillating = build([](double x) { return std::cos(2.0 * x); });
  const ScatterReport bad = cauchy_scan(oscillating, t, s);
  CHECK_FALSE(bad.verdict[0]);
  // symmetric with zero diagonal
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(bad.cauchy[1][i][i] == 0.0);
    for (std::size_t j = 0; j < t.size(); ++j) CHECK(bad.cauchy[1][i][j] == bad.cauchy[1][j][i]);
  }
}

TEST_CASE("Cauchy scan preconditions") {
  const GridSpec spec{1, 16, 4.0};
  std::vector<Field> two(2, Field(spec));
  const std::vector<double> t2{0.0, 1.0};
  CHECK_THROWS_AS(cauchy_scan(two, t2, default_s_list), DomainError);
  std::vector<Field> three(3, Field(spec));
  const std::vector<double> bad_t{0.0, 2.0, 1.0};
  CHECK_THROWS_AS(cauchy_scan(three, bad_t, default_s_list), StructuralError);
  const std::vector<double> t3{0.0, 1.0, 2.0};
  const std::vector<double> neg{-0.5};
  CHECK_THROWS_AS(cauchy_scan(three, t3, neg), DomainError);
}

TEST_CASE("commutator with the cutoff") {
  // Delta(chi u) - chi Delta u, converging spectrally in the resolution
  auto defect = [](int n) {
    const GridSpec g{2, n, 8.0};
    const Geometry geo = build_preset(Preset::identity, preset_defaults(Preset::identity), g);
    const Cutoff chi = make_cutoff(g, 3.0, 3.0, geo.damping, 1e-8);
    const Field u = packet(g, 1.0, 1.5, 0.5, 0.7);
    const Field lhs = laplacian(multiply(u, chi.values)) - multiply(laplacian(u), chi.values);
    return l2_norm(lhs - commutator(u, chi)) / l2_norm(lhs);
  };
  const double coarse = defect(64), fine = defect(128);
  CHECK(fine < 1e-3);
  CHECK(coarse / fine > 10.0);

  const GridSpec spec{2, 64, 8.0};
  const Geometry geo = build_preset(Preset::identity, preset_defaults(Preset::identity), spec);
  const Cutoff chi = make_cutoff(spec, 3.0, 3.0, geo.damping, 1e-8);
  const Field u = packet(spec, 1.0, 1.5, 0.5, 0.7);

  const std::vector<double> s{0.0, 0.5};
  const CutoffRecord rec = cutoff_diagnostics(u, chi, s);
  CHECK(rec.chi_u_norm[0] == doctest::Approx(l2_norm(multiply(u, chi.values))));
  CHECK(rec.chi_u_norm[1] >= rec.chi_u_norm[0]);
  RealGrid outside(spec.size());
  for (std::size_t i = 0; i < outside.size(); ++i) outside[i] = 1.0 - chi.values[i];
  CHECK(rec.exterior_l2 == doctest::Approx(l2_norm(multiply(u, outside))));
}

TEST_CASE("cutoff must cover the damping region") {
  const GridSpec spec{2, 32, 8.0};
  const Geometry geo = build_preset(Preset::identity, preset_defaults(Preset::identity), spec);
  CHECK_THROWS_AS(make_cutoff(spec, 1.0, 1.0, geo.damping, 1e-8), ConfigError);
  CHECK_THROWS_AS(make_cutoff(spec, 6.0, 3.0, geo.damping, 1e-8), ConfigError);
  const Cutoff c = make_cutoff(spec, 4.0, 1.0, geo.damping, 1e-8);
  CHECK(c.grad.size() == 2);
  CHECK_THROWS_AS(cutoff_from_values(spec, RealGrid(3)), StructuralError);
}
