#pragma once

// Periodic box [-L, L)^dim, complex fields on it, FFT-based differential
// operators and the Sobolev/local norms used by the monitors.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace dnls {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using RealGrid = std::vector<double>;

struct GridSpec {
  int dim = 1;
  int n = 64;  // points per axis, power of two
  double half_length = 1.0;

  std::size_t size() const;
  double dx() const { return 2.0 * half_length / n; }
  double cell_volume() const;
  double box_volume() const;
  double coordinate(int i) const { return -half_length + i * dx(); }
  /// Wave number of FFT index i: (pi/L) * m with m in [-n/2, n/2).
  double wave_number(int i) const;
  /// Per-axis indices of a flat (row-major, axis 0 slowest) index.
  std::array<int, 3> index(std::size_t flat) const;
  /// Physical position; unused axes are 0.
  Vec3 position(std::size_t flat) const;

  /// Throws StructuralError unless dim in {1,2,3}, n a power of two >= 4, L > 0.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

double norm(const Vec3& v);

class Field {
 public:
  explicit Field(const GridSpec& spec);
  Field(const GridSpec& spec, std::vector<cplx> values);

  static Field from_function(const GridSpec& spec,
                             const std::function<cplx(const Vec3&)>& fn);
  static Field from_real(const GridSpec& spec, std::span<const double> values);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }
  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(cplx s);

 private:
  GridSpec spec_;
  std::vector<cplx> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx s, Field a);

/// Pointwise product with a real table on the same grid.
Field multiply(const Field& f, std::span<const double> weight);

/// Symmetric dim x dim real tensor per grid point, stored as full matrices.
class SymmetricTensorField {
 public:
  SymmetricTensorField() = default;
  explicit SymmetricTensorField(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }
  double operator()(std::size_t point, int i, int j) const {
    return data_[(point * dim() + i) * dim() + j];
  }
  /// Writes both (i,j) and (j,i).
  void set(std::size_t point, int i, int j, double v);
  bool all_finite() const;

 private:
  GridSpec spec_;
  std::vector<double> data_;
};

/// FFTW plans plus per-mode wave-vector tables for one grid. Obtain through
/// spectral(); instances are cached and immutable after construction.
class Spectral {
 public:
  explicit Spectral(const GridSpec& spec);
  ~Spectral();
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  /// Unnormalised forward transform, in place.
  void forward(std::span<cplx> data) const;
  /// Inverse transform scaled by 1/size, in place.
  void inverse(std::span<cplx> data) const;

  /// First-derivative multiplier per axis; 0 on the Nyquist index.
  std::span<const double> wave_vector(int axis) const { return k_[axis]; }
  std::span<const double> k_squared() const { return k2_; }
  /// 1 for retained modes of the 2/3 rule, 0 otherwise.
  std::span<const double> dealias_mask() const { return mask_; }
  double max_k_squared(bool dealiased) const;

 private:
  GridSpec spec_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
  std::array<std::vector<double>, 3> k_;
  std::vector<double> k2_;
  std::vector<double> mask_;
};

const Spectral& spectral(const GridSpec& spec);

/// Thread count used for FFT plans created after the call (also read from
/// DNLS_THREADS at first use).
void set_fft_threads(int threads);

Field to_fourier(const Field& f);
Field from_fourier(const Field& f_hat);

std::vector<Field> gradient(const Field& f);
Field divergence(std::span<const Field> v);
/// Plain Laplacian through the -|k|^2 multiplier.
Field laplacian(const Field& f);
/// div(T grad f) for a symmetric tensor field T. With dealias set, the 2/3
/// mask is applied to the flux after the pointwise product and to the result.
Field tensor_divergence(const Field& f, const SymmetricTensorField& tensor, bool dealias);
/// Delta_G f = div(G grad f).
Field laplacian_G(const Field& f, const SymmetricTensorField& metric, bool dealias);

void dealias(Field& f);
/// exp(i t Delta) on the torus: multiplier exp(-i |k|^2 t).
Field free_evolve(const Field& f, double t);

/// <f, g> = sum conj(f) g dx^dim.
cplx inner(const Field& f, const Field& g);
double l2_norm(const Field& f);
/// H^s norm through the Fourier multiplier (1+|k|^2)^s, or |k|^{2s} when homogeneous.
double sobolev_norm(const Field& f, double s, bool homogeneous = false);

enum class LocalMode { density, energy, quartic };
/// Integral of |u|^2, |grad u|^2 + |u|^2 or |u|^4 over the grid points with |x| <= R.
double localized_integral(const Field& f, double radius, LocalMode mode);

/// Samples of chi = sqrt(1+|x|^2) and rho = |x| with their derivatives.
struct WeightTables {
  GridSpec spec;
  RealGrid chi;
  std::vector<RealGrid> grad_chi;  // dim components
  std::vector<RealGrid> hess_chi;  // dim*dim, row-major
  RealGrid lap_chi;
  RealGrid bilap_chi;
  std::vector<RealGrid> grad_rho;  // x/|x|
  RealGrid lap_rho;                // (dim-1)/|x|
  std::vector<RealGrid> grad_lap_rho;  // -(dim-1) x/|x|^3
};

WeightTables weight_tables(const GridSpec& spec);

/// Closed forms of the radial derivatives of chi in dimension d, as functions
/// of chi itself (valid for every d).
double chi_laplacian(double chi, int dim);
double chi_bilaplacian(double chi, int dim);

// Snapshot files: "DNLS", u32 version, u32 dim, u32 n, f64 L, f64 time, then
// interleaved (re, im) float64, little-endian, row-major.
inline constexpr std::uint32_t snapshot_version = 1;
void write_snapshot(const std::filesystem::path& path, const Field& u, double time);
struct SnapshotData {
  Field u;
  double time;
};
SnapshotData read_snapshot(const std::filesystem::path& path);

}  // namespace dnls
