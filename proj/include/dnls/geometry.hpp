#pragma once

// Coefficient fields G(x) and a(x): parametric presets, the control
// condition supp(G - I) in {a > 0}, and the constants derived from them.

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "dnls/grid.hpp"

namespace dnls {

using Mat3 = std::array<std::array<double, 3>, 3>;

enum class Preset { identity, conformal_bump, anisotropic_bump, uncontrolled_bump };
enum class BumpShape { ball, ring };

Preset parse_preset(const std::string& name);
std::string to_string(Preset p);
BumpShape parse_shape(const std::string& name);
std::string to_string(BumpShape s);

/// b(s) = exp(1 - 1/(1 - s^2)) for |s| < 1, else 0; b(0) = 1.
double bump_profile(double s);
double bump_profile_derivative(double s);
/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t);

/// All preset knobs. Values are used as given; preset_defaults() fills the
/// documented defaults for a preset.
struct GeometryParams {
  double beta = 0.5;        // metric amplitude (conformal / first anisotropic axis)
  double beta_perp = 0.0;   // anisotropic: remaining axes
  double radius = 2.0;      // ball radius, or ring half width
  BumpShape shape = BumpShape::ball;
  double ring_radius = 3.0;
  Vec3 center{0.0, 0.0, 0.0};  // metric bump centre
  double damping_amplitude = 1.0;
  double damping_inner = 0.0;  // plateau starts here (0 = full ball)
  double damping_outer = 2.0;  // plateau ends here
  double damping_width = 1.0;  // smooth transition width on each side
  double g_tol = 1e-12;
  double a_min = 1e-8;

  bool operator==(const GeometryParams&) const = default;
};

GeometryParams preset_defaults(Preset p);

struct MetricSample {
  Mat3 g{};                  // G(x)
  std::array<Mat3, 3> dg{};  // dg[k] = d_k G
};

/// Closed-form metric usable at arbitrary x.
class MetricModel {
 public:
  MetricModel() = default;
  MetricModel(int dim, Preset preset, const GeometryParams& params);

  MetricSample evaluate(const Vec3& x) const;
  Mat3 value(const Vec3& x) const { return evaluate(x).g; }
  /// Radius (about the origin) outside which G = I.
  double support_radius() const;
  bool is_identity() const { return preset_ == Preset::identity; }
  int dim() const { return dim_; }

 private:
  // scalar profile and its gradient at x
  double profile(const Vec3& x, Vec3* grad) const;

  int dim_ = 3;
  Preset preset_ = Preset::identity;
  GeometryParams params_{};
};

/// Radial damping a(x) = amplitude * plateau(|x|) about the origin.
class DampingModel {
 public:
  DampingModel() = default;
  explicit DampingModel(const GeometryParams& params);

  double value(const Vec3& x) const;
  double support_radius() const;
  double amplitude() const { return amplitude_; }

 private:
  double amplitude_ = 0.0;
  double inner_ = 0.0;
  double outer_ = 0.0;
  double width_ = 1.0;
};

struct MetricField {
  MetricModel model;
  SymmetricTensorField samples;       // G
  SymmetricTensorField perturbation;  // G - I
  bool identity = true;

  const GridSpec& spec() const { return samples.spec(); }
};

struct DampingField {
  DampingModel model;
  GridSpec spec;
  RealGrid values;
};

MetricField sample_metric(const GridSpec& spec, const MetricModel& model);
DampingField sample_damping(const GridSpec& spec, const DampingModel& model);

struct Geometry {
  Preset preset = Preset::identity;
  GeometryParams params;
  MetricField metric;
  DampingField damping;
};

/// Builds the preset on the grid. Throws InvalidMetricError when the metric is
/// not coercive and DomainError when a support radius does not fit the box.
Geometry build_preset(Preset preset, const GeometryParams& params, const GridSpec& spec);

struct ControlReport {
  bool satisfied = true;
  std::vector<std::array<int, 3>> violations;  // grid indices
  double delta0 = std::numeric_limits<double>::infinity();
};

ControlReport check_control(const MetricField& g, const DampingField& a, double g_tol,
                            double a_min);

/// Smallest eigenvalue of a symmetric matrix (closed form for dim <= 3).
double min_eigenvalue(const Mat3& m, int dim);
/// Largest |eigenvalue| of a symmetric matrix.
double spectral_radius(const Mat3& m, int dim);

/// min over the grid of the smallest eigenvalue of G. Throws
/// InvalidMetricError if that is not positive.
double coercivity_constant(const MetricField& g);
/// sup over the grid of the spectral norm of G - I.
double perturbation_sup(const MetricField& g);

/// Smallest C with |grad a| <= C a + eps on the grid (grad a spectral).
double gradient_bound_constant(const DampingField& a, double eps);

/// Smooth radial cutoff: 1 on |x| <= radius, 0 beyond radius + width.
RealGrid radial_cutoff(const GridSpec& spec, double radius, double width);

/// Delta_G a on the grid, computed spectrally without dealiasing.
RealGrid metric_laplacian_of(const DampingField& a, const MetricField& g);

}  // namespace dnls
