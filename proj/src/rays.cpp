#include "dnls/rays.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "dnls/errors.hpp"

namespace dnls {

std::string to_string(FateKind k) {
  switch (k) {
    case FateKind::escaped:
      return "escaped";
    case FateKind::controlled:
      return "controlled";
    case FateKind::trapped_at_horizon:
      return "trapped";
  }
  return "trapped";
}

double hamiltonian(const Vec3& x, const Vec3& xi, const MetricModel& g) {
  const Mat3 m = g.value(x);
  double h = 0.0;
  for (int i = 0; i < g.dim(); ++i)
    for (int j = 0; j < g.dim(); ++j) h += m[i][j] * xi[i] * xi[j];
  return h;
}

namespace {

struct Derivative {
  Vec3 dx{0.0, 0.0, 0.0};
  Vec3 dxi{0.0, 0.0, 0.0};
};

Derivative flow(const Vec3& x, const Vec3& xi, const MetricModel& g) {
  const MetricSample s = g.evaluate(x);
  const int dim = g.dim();
  Derivative d;
  for (int i = 0; i < dim; ++i) {
    double v = 0.0;
    for (int j = 0; j < dim; ++j) v += s.g[i][j] * xi[j];
    d.dx[i] = 2.0 * v;
  }
  for (int k = 0; k < dim; ++k) {
    double v = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) v += s.dg[k][i][j] * xi[i] * xi[j];
    d.dxi[k] = -v;
  }
  return d;
}

Vec3 axpy(const Vec3& a, double s, const Vec3& b) {
  return {a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
}

RayState rk4_step(const RayState& y, double h, const MetricModel& g) {
  const Derivative k1 = flow(y.x, y.xi, g);
  const Derivative k2 = flow(axpy(y.x, 0.5 * h, k1.dx), axpy(y.xi, 0.5 * h, k1.dxi), g);
  const Derivative k3 = flow(axpy(y.x, 0.5 * h, k2.dx), axpy(y.xi, 0.5 * h, k2.dxi), g);
  const Derivative k4 = flow(axpy(y.x, h, k3.dx), axpy(y.xi, h, k3.dxi), g);
  RayState out;
  for (int i = 0; i < 3; ++i) {
    out.x[i] = y.x[i] + h / 6.0 * (k1.dx[i] + 2.0 * k2.dx[i] + 2.0 * k3.dx[i] + k4.dx[i]);
    out.xi[i] = y.xi[i] + h / 6.0 * (k1.dxi[i] + 2.0 * k2.dxi[i] + 2.0 * k3.dxi[i] + k4.dxi[i]);
  }
  out.t = y.t + h;
  return out;
}

bool finite_state(const RayState& s) {
  for (int i = 0; i < 3; ++i)
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.xi[i])) return false;
  return std::isfinite(s.t);
}

// Cubic Hermite interpolation of x on [a.t, b.t] using x' = 2 G xi at both ends.
class HermiteSegment {
 public:
  HermiteSegment(const RayState& a, const RayState& b, const MetricModel& g)
      : a_(a), b_(b), h_(b.t - a.t), va_(flow(a.x, a.xi, g).dx), vb_(flow(b.x, b.xi, g).dx) {}

  Vec3 position(double theta) const {
    const double t2 = theta * theta, t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + theta;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    Vec3 x;
    for (int i = 0; i < 3; ++i)
      x[i] = h00 * a_.x[i] + h10 * h_ * va_[i] + h01 * b_.x[i] + h11 * h_ * vb_[i];
    return x;
  }
  double time(double theta) const { return a_.t + theta * h_; }

  /// Fraction of the step where pred flips (pred(0) != pred(1) assumed).
  template <typename Pred>
  double crossing(Pred pred) const {
    double lo = 0.0, hi = 1.0;
    const bool start = pred(position(0.0));
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pred(position(mid)) == start) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  RayState a_, b_;
  double h_;
  Vec3 va_, vb_;
};

// Streaming classifier shared by classify_ray and the ensemble driver.
class FateTracker {
 public:
  FateTracker(const MetricModel& g, const DampingModel& a, double r_escape, double a_min,
              const RayState& start)
      : g_(g), a_(a), r_escape_(r_escape), a_min_(a_min), prev_(start) {
    h0_ = hamiltonian(start.x, start.xi, g);
    t0_ = start.t;
    if (in_control(start.x)) fate_.t_first_hit = start.t;
    if (norm(start.x) > r_escape) {
      escaped_ = true;
      fate_.t_exit = start.t;
    }
  }

  /// Returns true once the ray has escaped.
  bool advance(const RayState& next) {
    if (escaped_) return true;
    const double h = hamiltonian(next.x, next.xi, g_);
    if (h0_ != 0.0) fate_.hamiltonian_drift = std::max(fate_.hamiltonian_drift, std::abs(h - h0_) / std::abs(h0_));

    const bool c0 = in_control(prev_.x), c1 = in_control(next.x);
    const bool e1 = norm(next.x) > r_escape_;
    std::optional<HermiteSegment> seg;
    if (c0 != c1 || e1) seg.emplace(prev_, next, g_);

    const double step = std::abs(next.t - prev_.t);
    if (c0 && c1) {
      fate_.time_in_control += step;
    } else if (c0 != c1) {
      const double theta = seg->crossing([&](const Vec3& x) { return in_control(x); });
      fate_.time_in_control += c0 ? theta * step : (1.0 - theta) * step;
      if (c1 && fate_.t_first_hit < 0.0) fate_.t_first_hit = seg->time(theta);
    }
    if (e1) {
      const double theta = seg->crossing([&](const Vec3& x) { return norm(x) > r_escape_; });
      fate_.t_exit = seg->time(theta);
      escaped_ = true;
    }
    prev_ = next;
    return escaped_;
  }

  RayFate finish() const {
    RayFate f = fate_;
    f.horizon = prev_.t - t0_;
    if (escaped_) {
      f.kind = FateKind::escaped;
    } else if (f.t_first_hit >= 0.0) {
      f.kind = FateKind::controlled;
    } else {
      f.kind = FateKind::trapped_at_horizon;
    }
    return f;
  }

 private:
  bool in_control(const Vec3& x) const { return a_.value(x) > a_min_; }

  const MetricModel& g_;
  const DampingModel& a_;
  double r_escape_, a_min_;
  RayState prev_;
  double h0_ = 0.0, t0_ = 0.0;
  bool escaped_ = false;
  RayFate fate_{};
};

}  // namespace

std::vector<RayState> integrate_ray(const Vec3& x0, const Vec3& xi0, const MetricModel& g,
                                    double horizon, double dt,
                                    const std::function<bool(const RayState&)>& stop) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw DomainError("ray step must be non-zero");
  if (!(horizon > 0.0)) throw DomainError("ray horizon must be positive");
  const long steps = std::lround(std::ceil(horizon / std::abs(dt) - 1e-9));
  const double h = std::copysign(horizon / steps, dt);
  std::vector<RayState> traj;
  traj.reserve(steps + 1);
  RayState s{x0, xi0, 0.0};
  traj.push_back(s);
  for (long n = 0; n < steps; ++n) {
    s = rk4_step(s, h, g);
    s.t = (n + 1) * h;
    if (!finite_state(s)) {
      std::ostringstream os;
      os << "ray state became non-finite at t = " << s.t;
      throw StabilityError(os.str());
    }
    traj.push_back(s);
    if (stop && stop(s)) break;
  }
  return traj;
}

RayFate classify_ray(std::span<const RayState> trajectory, const MetricModel& g,
                     const DampingModel& a, double r_escape, double a_min) {
  if (trajectory.empty()) throw DomainError("empty trajectory");
  FateTracker tracker(g, a, r_escape, a_min, trajectory.front());
  for (std::size_t i = 1; i < trajectory.size(); ++i)
    if (tracker.advance(trajectory[i])) break;
  return tracker.finish();
}

double default_escape_radius(const MetricModel& g, const DampingModel& a) {
  return 1.5 * std::max(g.support_radius(), a.support_radius()) + 5.0;
}

namespace {

Vec3 unit_direction(int dim, int index, int count) {
  if (dim == 1) return {index % 2 == 0 ? 1.0 : -1.0, 0.0, 0.0};
  if (dim == 2) {
    const double phi = 2.0 * std::numbers::pi * (index + 0.5) / count;
    return {std::cos(phi), std::sin(phi), 0.0};
  }
  // Fibonacci sphere
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - 2.0 * (index + 0.5) / count;
  const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rxy * std::cos(golden * index), rxy * std::sin(golden * index), z};
}

}  // namespace

std::vector<std::pair<Vec3, Vec3>> ensemble_initial_conditions(const EnsembleSpec& spec, int dim) {
  std::vector<std::pair<Vec3, Vec3>> out;
  const double R = spec.sample_radius;
  if (spec.kind == EnsembleSpec::Kind::lattice) {
    const int m = std::max(1, spec.lattice_points);
    const int dirs = std::max(1, spec.lattice_directions);
    std::array<int, 3> idx{0, 0, 0};
    const int total = static_cast<int>(std::pow(m, dim));
    for (int flat = 0; flat < total; ++flat) {
      int rest = flat;
      for (int d = 0; d < dim; ++d) {
        idx[d] = rest % m;
        rest /= m;
      }
      Vec3 x{0.0, 0.0, 0.0};
      for (int d = 0; d < dim; ++d) x[d] = m == 1 ? 0.0 : -R + 2.0 * R * idx[d] / (m - 1);
      if (norm(x) > R * (1.0 + 1e-12)) continue;
      for (int k = 0; k < dirs; ++k) out.emplace_back(x, unit_direction(dim, k, dirs));
    }
    return out;
  }
  // per-ray generators keep each ray reproducible independent of the others
  for (int i = 0; i < spec.count; ++i) {
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec3 dir{0.0, 0.0, 0.0}, pos{0.0, 0.0, 0.0};
    double len = 0.0;
    while (len < 1e-12) {
      for (int d = 0; d < dim; ++d) dir[d] = normal(rng);
      len = norm(dir);
    }
    for (int d = 0; d < dim; ++d) dir[d] /= len;
    double plen = 0.0;
    Vec3 g{0.0, 0.0, 0.0};
    while (plen < 1e-12) {
      for (int d = 0; d < dim; ++d) g[d] = normal(rng);
      plen = norm(g);
    }
    const double radius = R * std::pow(uni(rng), 1.0 / dim);
    for (int d = 0; d < dim; ++d) pos[d] = radius * g[d] / plen;
    out.emplace_back(pos, dir);
  }
  return out;
}

EnsembleSummary verify_exterior_control(const EnsembleSpec& spec, int dim, const MetricModel& g,
                                        const DampingModel& a, double horizon, double dt,
                                        double r_escape, double a_min) {
  if (!(r_escape > std::max(g.support_radius(), a.support_radius())))
    throw DomainError("escape radius must exceed both support radii");
  EnsembleSummary summary;
  for (const auto& [x0, xi0] : ensemble_initial_conditions(spec, dim)) {
    RayState start{x0, xi0, 0.0};
    FateTracker tracker(g, a, r_escape, a_min, start);
    integrate_ray(x0, xi0, g, horizon, dt,
                  [&](const RayState& s) { return tracker.advance(s); });
    const RayFate fate = tracker.finish();
    switch (fate.kind) {
      case FateKind::escaped:
        ++summary.escaped;
        break;
      case FateKind::controlled:
        ++summary.controlled;
        break;
      case FateKind::trapped_at_horizon:
        ++summary.trapped;
        break;
    }
    summary.max_hamiltonian_drift = std::max(summary.max_hamiltonian_drift, fate.hamiltonian_drift);
    summary.rays.push_back({x0, xi0, fate});
  }
  return summary;
}

}  // namespace dnls
