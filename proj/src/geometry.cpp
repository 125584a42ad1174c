#include "dnls/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dnls/errors.hpp"

namespace dnls {

Preset parse_preset(const std::string& name) {
  if (name == "identity") return Preset::identity;
  if (name == "conformal_bump") return Preset::conformal_bump;
  if (name == "anisotropic_bump") return Preset::anisotropic_bump;
  if (name == "uncontrolled_bump") return Preset::uncontrolled_bump;
  throw DomainError("unknown geometry preset '" + name + "'");
}

std::string to_string(Preset p) {
  switch (p) {
    case Preset::identity:
      return "identity";
    case Preset::conformal_bump:
      return "conformal_bump";
    case Preset::anisotropic_bump:
      return "anisotropic_bump";
    case Preset::uncontrolled_bump:
      return "uncontrolled_bump";
  }
  return "identity";
}

BumpShape parse_shape(const std::string& name) {
  if (name == "ball") return BumpShape::ball;
  if (name == "ring") return BumpShape::ring;
  throw DomainError("unknown bump shape '" + name + "'");
}

std::string to_string(BumpShape s) { return s == BumpShape::ball ? "ball" : "ring"; }

double bump_profile(double s) {
  const double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / q);
}

double bump_profile_derivative(double s) {
  const double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  return bump_profile(s) * (-2.0 * s / (q * q));
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

GeometryParams preset_defaults(Preset p) {
  GeometryParams g;
  switch (p) {
    case Preset::identity:
      g.beta = 0.0;
      g.damping_outer = 0.0;
      g.damping_width = 2.0;
      break;
    case Preset::conformal_bump:
      g.beta = 0.5;
      g.radius = 2.0;
      g.damping_outer = 2.0;
      g.damping_width = 1.0;
      break;
    case Preset::anisotropic_bump:
      g.beta = 0.4;
      g.beta_perp = -0.3;
      g.radius = 2.0;
      g.damping_outer = 2.0;
      g.damping_width = 1.0;
      break;
    case Preset::uncontrolled_bump:
      // slow annular channel: rays with tangential momentum stay in it
      g.beta = -0.8;
      g.shape = BumpShape::ring;
      g.ring_radius = 3.0;
      g.radius = 1.5;
      g.damping_outer = 0.0;
      g.damping_width = 1.0;
      break;
  }
  return g;
}

// ------------------------------------------------------------ MetricModel

MetricModel::MetricModel(int dim, Preset preset, const GeometryParams& params)
    : dim_(dim), preset_(preset), params_(params) {}

double MetricModel::profile(const Vec3& x, Vec3* grad) const {
  Vec3 y{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) y[d] = x[d] - params_.center[d];
  const double r = norm(y);
  double s, ds_dr;
  if (params_.shape == BumpShape::ball) {
    s = r / params_.radius;
    ds_dr = 1.0 / params_.radius;
  } else {
    s = (r - params_.ring_radius) / params_.radius;
    ds_dr = 1.0 / params_.radius;
  }
  const double b = bump_profile(s);
  if (grad) {
    *grad = {0.0, 0.0, 0.0};
    if (b > 0.0) {
      if (params_.shape == BumpShape::ball) {
        // b'(s)/s is finite at s = 0
        const double q = 1.0 - s * s;
        const double factor = b * (-2.0 / (q * q)) / (params_.radius * params_.radius);
        for (int d = 0; d < dim_; ++d) (*grad)[d] = factor * y[d];
      } else if (r > 0.0) {
        const double db = bump_profile_derivative(s) * ds_dr;
        for (int d = 0; d < dim_; ++d) (*grad)[d] = db * y[d] / r;
      }
    }
  }
  return b;
}

MetricSample MetricModel::evaluate(const Vec3& x) const {
  MetricSample out;
  for (int i = 0; i < 3; ++i) out.g[i][i] = 1.0;
  if (preset_ == Preset::identity) return out;
  Vec3 grad;
  const double b = profile(x, &grad);
  std::array<double, 3> amp{params_.beta, params_.beta, params_.beta};
  if (preset_ == Preset::anisotropic_bump) amp = {params_.beta, params_.beta_perp, params_.beta_perp};
  for (int i = 0; i < dim_; ++i) {
    out.g[i][i] += amp[i] * b;
    for (int k = 0; k < dim_; ++k) out.dg[k][i][i] = amp[i] * grad[k];
  }
  return out;
}

double MetricModel::support_radius() const {
  if (preset_ == Preset::identity) return 0.0;
  double c = 0.0;
  for (int d = 0; d < dim_; ++d) c += params_.center[d] * params_.center[d];
  c = std::sqrt(c);
  return params_.shape == BumpShape::ball ? c + params_.radius
                                          : c + params_.ring_radius + params_.radius;
}

// ----------------------------------------------------------- DampingModel

DampingModel::DampingModel(const GeometryParams& p)
    : amplitude_(p.damping_amplitude),
      inner_(p.damping_inner),
      outer_(p.damping_outer),
      width_(p.damping_width) {}

double DampingModel::value(const Vec3& x) const {
  if (amplitude_ == 0.0) return 0.0;
  const double r = norm(x);
  double v = smooth_step((outer_ + width_ - r) / width_);
  if (inner_ > 0.0) v *= smooth_step((r - (inner_ - width_)) / width_);
  return amplitude_ * v;
}

double DampingModel::support_radius() const {
  return amplitude_ == 0.0 ? 0.0 : outer_ + width_;
}

// --------------------------------------------------------------- sampling

MetricField sample_metric(const GridSpec& spec, const MetricModel& model) {
  MetricField m{model, SymmetricTensorField(spec), SymmetricTensorField(spec),
                model.is_identity()};
  const int dim = spec.dim;
  for (std::size_t p = 0; p < spec.size(); ++p) {
    const Mat3 g = model.value(spec.position(p));
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        m.samples.set(p, i, j, g[i][j]);
        m.perturbation.set(p, i, j, g[i][j] - (i == j ? 1.0 : 0.0));
      }
    }
  }
  return m;
}

DampingField sample_damping(const GridSpec& spec, const DampingModel& model) {
  DampingField a{model, spec, RealGrid(spec.size())};
  for (std::size_t p = 0; p < spec.size(); ++p) a.values[p] = model.value(spec.position(p));
  return a;
}

// ------------------------------------------------------------ eigenvalues

namespace {

std::array<double, 3> eigenvalues(const Mat3& m, int dim) {
  if (dim == 1) return {m[0][0], m[0][0], m[0][0]};
  if (dim == 2) {
    const double mean = 0.5 * (m[0][0] + m[1][1]);
    const double half_diff = 0.5 * (m[0][0] - m[1][1]);
    const double rad = std::sqrt(half_diff * half_diff + m[0][1] * m[0][1]);
    return {mean - rad, mean + rad, mean + rad};
  }
  // symmetric 3x3, trigonometric form
  const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
  const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
  if (p1 == 0.0) {
    std::array<double, 3> e{m[0][0], m[1][1], m[2][2]};
    std::sort(e.begin(), e.end());
    return e;
  }
  const double p2 = (m[0][0] - q) * (m[0][0] - q) + (m[1][1] - q) * (m[1][1] - q) +
                    (m[2][2] - q) * (m[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Mat3 b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                     b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e_max = q + 2.0 * p * std::cos(phi);
  const double e_min = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e_min, 3.0 * q - e_min - e_max, e_max};
}

Mat3 point_matrix(const SymmetricTensorField& t, std::size_t p) {
  Mat3 m{};
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j) m[i][j] = t(p, i, j);
  return m;
}

double frobenius(const Mat3& m, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) s += m[i][j] * m[i][j];
  return std::sqrt(s);
}

}  // namespace

double min_eigenvalue(const Mat3& m, int dim) { return eigenvalues(m, dim)[0]; }

double spectral_radius(const Mat3& m, int dim) {
  const auto e = eigenvalues(m, dim);
  return std::max(std::abs(e[0]), std::abs(e[dim == 1 ? 0 : 2]));
}

double coercivity_constant(const MetricField& g) {
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.spec().size(); ++p)
    c = std::min(c, min_eigenvalue(point_matrix(g.samples, p), g.spec().dim));
  if (!(c > 0.0)) {
    std::ostringstream os;
    os << "metric is not uniformly positive definite: min eigenvalue " << c;
    throw InvalidMetricError(os.str());
  }
  return c;
}

double perturbation_sup(const MetricField& g) {
  double s = 0.0;
  for (std::size_t p = 0; p < g.spec().size(); ++p)
    s = std::max(s, spectral_radius(point_matrix(g.perturbation, p), g.spec().dim));
  return s;
}

// ---------------------------------------------------------------- presets

Geometry build_preset(Preset preset, const GeometryParams& params, const GridSpec& spec) {
  spec.validate();
  const double L = spec.half_length;
  if (preset != Preset::identity) {
    if (!(params.radius > 0.0)) throw DomainError("bump radius must be positive");
    if (params.shape == BumpShape::ring && !(params.ring_radius > params.radius))
      throw DomainError("ring radius must exceed the ring half width");
  }
  if (!(params.damping_amplitude >= 0.0)) throw DomainError("damping amplitude must be >= 0");
  if (!(params.damping_width > 0.0)) throw DomainError("damping width must be positive");
  if (params.damping_inner < 0.0 || params.damping_inner > params.damping_outer)
    throw DomainError("damping plateau needs 0 <= inner <= outer");
  if (params.damping_inner > 0.0 && params.damping_inner < params.damping_width)
    throw DomainError("damping annulus transition would cross the origin");

  // closed-form coercivity: the profile peaks at 1
  if (preset != Preset::identity) {
    double lowest = 1.0 + std::min(0.0, params.beta);
    if (preset == Preset::anisotropic_bump && spec.dim > 1)
      lowest = std::min(lowest, 1.0 + std::min(0.0, params.beta_perp));
    if (!(lowest > 0.0)) {
      std::ostringstream os;
      os << "metric amplitude destroys coercivity: min eigenvalue " << lowest;
      throw InvalidMetricError(os.str());
    }
  }

  Geometry geo;
  geo.preset = preset;
  geo.params = params;
  MetricModel model(spec.dim, preset, params);
  if (!(model.support_radius() < L))
    throw DomainError("metric perturbation support must lie inside the box");
  DampingModel damping(params);
  if (!(damping.support_radius() < L))
    throw DomainError("damping support must lie inside the box");
  geo.metric = sample_metric(spec, model);
  geo.damping = sample_damping(spec, damping);
  coercivity_constant(geo.metric);
  return geo;
}

// ---------------------------------------------------------------- control

ControlReport check_control(const MetricField& g, const DampingField& a, double g_tol,
                            double a_min) {
  if (!(g.spec() == a.spec)) throw StructuralError("metric and damping on different grids");
  ControlReport report;
  const int dim = g.spec().dim;
  for (std::size_t p = 0; p < a.spec.size(); ++p) {
    if (frobenius(point_matrix(g.perturbation, p), dim) <= g_tol) continue;
    const double av = a.values[p];
    report.delta0 = std::min(report.delta0, av);
    if (!(av > a_min)) {
      report.satisfied = false;
      report.violations.push_back(a.spec.index(p));
    }
  }
  return report;
}

double gradient_bound_constant(const DampingField& a, double eps) {
  if (!(eps > 0.0)) throw DomainError("epsilon must be positive");
  const Field f = Field::from_real(a.spec, a.values);
  const auto grad = gradient(f);
  double c = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    const double av = a.values[p];
    if (!(av > 0.0)) continue;
    double g2 = 0.0;
    for (const auto& comp : grad) g2 += comp[p].real() * comp[p].real();
    const double excess = std::sqrt(g2) - eps;
    if (excess > 0.0) c = std::max(c, excess / av);
  }
  return c;
}

RealGrid metric_laplacian_of(const DampingField& a, const MetricField& g) {
  const Field f = Field::from_real(a.spec, a.values);
  const Field lap = laplacian_G(f, g.samples, false);
  RealGrid out(lap.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = lap[p].real();
  return out;
}

RealGrid radial_cutoff(const GridSpec& spec, double radius, double width) {
  if (!(radius >= 0.0) || !(width > 0.0)) throw DomainError("cutoff needs radius >= 0 and width > 0");
  if (radius + width >= spec.half_length) throw DomainError("cutoff support must fit in the box");
  RealGrid out(spec.size());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = smooth_step((radius + width - norm(spec.position(p))) / width);
  return out;
}

}  // namespace dnls
