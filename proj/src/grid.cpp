#include "dnls/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "dnls/errors.hpp"

namespace dnls {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

int& fft_thread_count() {
  static int count = [] {
    if (const char* env = std::getenv("DNLS_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return 1;
  }();
  return count;
}

void ensure_fftw_threads() {
  static bool initialised = [] {
    fftw_init_threads();
    return true;
  }();
  (void)initialised;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

void require_same_spec(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw StructuralError("fields live on different grids");
}

}  // namespace

// ---------------------------------------------------------------- GridSpec

std::size_t GridSpec::size() const {
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
  return total;
}

double GridSpec::cell_volume() const { return std::pow(dx(), dim); }

double GridSpec::box_volume() const { return std::pow(2.0 * half_length, dim); }

double GridSpec::wave_number(int i) const {
  const int m = i < n / 2 ? i : i - n;
  return std::numbers::pi / half_length * m;
}

std::array<int, 3> GridSpec::index(std::size_t flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int d = dim - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(flat % n);
    flat /= n;
  }
  return idx;
}

Vec3 GridSpec::position(std::size_t flat) const {
  const auto idx = index(flat);
  Vec3 x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim; ++d) x[d] = coordinate(idx[d]);
  return x;
}

void GridSpec::validate() const {
  if (dim < 1 || dim > 3) throw StructuralError("grid dimension must be 1, 2 or 3");
  if (n < 4 || (n & (n - 1)) != 0)
    throw StructuralError("points per axis must be a power of two >= 4");
  if (!(half_length > 0.0) || !std::isfinite(half_length))
    throw StructuralError("half length must be positive and finite");
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

// ------------------------------------------------------------------- Field

Field::Field(const GridSpec& spec) : spec_(spec), values_(spec.size(), cplx{0.0, 0.0}) {
  spec_.validate();
}

Field::Field(const GridSpec& spec, std::vector<cplx> values)
    : spec_(spec), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.size())
    throw StructuralError("field length does not match grid size");
}

Field Field::from_function(const GridSpec& spec, const std::function<cplx(const Vec3&)>& fn) {
  Field f(spec);
  for (std::size_t i = 0; i < f.size(); ++i) f.values_[i] = fn(spec.position(i));
  return f;
}

Field Field::from_real(const GridSpec& spec, std::span<const double> values) {
  if (values.size() != spec.size()) throw StructuralError("table length does not match grid");
  Field f(spec);
  for (std::size_t i = 0; i < f.size(); ++i) f.values_[i] = values[i];
  return f;
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

Field& Field::operator+=(const Field& other) {
  require_same_spec(spec_, other.spec_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_spec(spec_, other.spec_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Field& Field::operator*=(cplx s) {
  for (auto& v : values_) v *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx s, Field a) { return a *= s; }

Field multiply(const Field& f, std::span<const double> weight) {
  if (weight.size() != f.size()) throw StructuralError("weight table does not match field");
  Field out = f;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= weight[i];
  return out;
}

// ---------------------------------------------------- SymmetricTensorField

SymmetricTensorField::SymmetricTensorField(const GridSpec& spec)
    : spec_(spec), data_(spec.size() * spec.dim * spec.dim, 0.0) {}

void SymmetricTensorField::set(std::size_t point, int i, int j, double v) {
  data_[(point * dim() + i) * dim() + j] = v;
  data_[(point * dim() + j) * dim() + i] = v;
}

bool SymmetricTensorField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- Spectral

struct Spectral::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

Spectral::Spectral(const GridSpec& spec) : spec_(spec), plans_(std::make_unique<Plans>()) {
  spec_.validate();
  const std::size_t total = spec_.size();
  {
    std::lock_guard lock(plan_mutex());
    ensure_fftw_threads();
    fftw_plan_with_nthreads(fft_thread_count());
    std::vector<cplx> scratch(total);
    std::vector<int> dims(spec_.dim, spec_.n);
    const unsigned flags = FFTW_MEASURE | FFTW_UNALIGNED;
    plans_->forward = fftw_plan_dft(spec_.dim, dims.data(), as_fftw(scratch.data()),
                                    as_fftw(scratch.data()), FFTW_FORWARD, flags);
    plans_->backward = fftw_plan_dft(spec_.dim, dims.data(), as_fftw(scratch.data()),
                                     as_fftw(scratch.data()), FFTW_BACKWARD, flags);
  }
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("FFTW planning failed");

  const double k_unit = std::numbers::pi / spec_.half_length;
  for (int d = 0; d < spec_.dim; ++d) k_[d].resize(total);
  k2_.resize(total);
  mask_.resize(total);
  for (std::size_t p = 0; p < total; ++p) {
    const auto idx = spec_.index(p);
    double k2 = 0.0;
    bool kept = true;
    for (int d = 0; d < spec_.dim; ++d) {
      const int m = idx[d] < spec_.n / 2 ? idx[d] : idx[d] - spec_.n;
      const double k = k_unit * m;
      // first derivatives drop the unpaired Nyquist mode so real fields stay real
      k_[d][p] = 2 * m == -spec_.n ? 0.0 : k;
      k2 += k * k;
      if (3 * std::abs(m) >= spec_.n) kept = false;
    }
    k2_[p] = k2;
    mask_[p] = kept ? 1.0 : 0.0;
  }
}

Spectral::~Spectral() {
  std::lock_guard lock(plan_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

void Spectral::forward(std::span<cplx> data) const {
  if (data.size() != spec_.size()) throw StructuralError("transform length mismatch");
  fftw_execute_dft(plans_->forward, as_fftw(data.data()), as_fftw(data.data()));
}

void Spectral::inverse(std::span<cplx> data) const {
  if (data.size() != spec_.size()) throw StructuralError("transform length mismatch");
  fftw_execute_dft(plans_->backward, as_fftw(data.data()), as_fftw(data.data()));
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

double Spectral::max_k_squared(bool dealiased) const {
  int m_max = spec_.n / 2;
  if (dealiased) {
    m_max = 0;
    while (3 * (m_max + 1) < spec_.n) ++m_max;
  }
  const double k = std::numbers::pi / spec_.half_length * m_max;
  return spec_.dim * k * k;
}

const Spectral& spectral(const GridSpec& spec) {
  static std::mutex cache_mutex;
  static std::map<std::tuple<int, int, double>, std::unique_ptr<Spectral>> cache;
  std::lock_guard lock(cache_mutex);
  auto key = std::make_tuple(spec.dim, spec.n, spec.half_length);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<Spectral>(spec)).first;
  return *it->second;
}

void set_fft_threads(int threads) {
  std::lock_guard lock(plan_mutex());
  fft_thread_count() = std::max(1, threads);
}

// --------------------------------------------------------------- operators

Field to_fourier(const Field& f) {
  Field out = f;
  spectral(f.spec()).forward(out.values());
  return out;
}

Field from_fourier(const Field& f_hat) {
  Field out = f_hat;
  spectral(f_hat.spec()).inverse(out.values());
  return out;
}

namespace {

// inverse transform of (i k_axis) * f_hat
Field derivative_from_hat(const Field& f_hat, int axis) {
  const auto& sp = spectral(f_hat.spec());
  const auto k = sp.wave_vector(axis);
  Field out = f_hat;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= cplx(0.0, k[i]);
  sp.inverse(v);
  return out;
}

}  // namespace

std::vector<Field> gradient(const Field& f) {
  const Field f_hat = to_fourier(f);
  std::vector<Field> grad;
  grad.reserve(f.spec().dim);
  for (int d = 0; d < f.spec().dim; ++d) grad.push_back(derivative_from_hat(f_hat, d));
  return grad;
}

Field divergence(std::span<const Field> v) {
  if (v.empty()) throw StructuralError("divergence of an empty vector field");
  const GridSpec& spec = v.front().spec();
  if (static_cast<int>(v.size()) != spec.dim)
    throw StructuralError("vector field needs one component per dimension");
  for (const auto& c : v) require_same_spec(spec, c.spec());
  const auto& sp = spectral(spec);
  Field acc(spec);
  auto a = acc.values();
  for (int d = 0; d < spec.dim; ++d) {
    Field c = v[d];
    sp.forward(c.values());
    const auto k = sp.wave_vector(d);
    const auto cv = c.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += cplx(0.0, k[i]) * cv[i];
  }
  sp.inverse(a);
  return acc;
}

Field laplacian(const Field& f) {
  const auto& sp = spectral(f.spec());
  Field out = f;
  auto v = out.values();
  sp.forward(v);
  const auto k2 = sp.k_squared();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= -k2[i];
  sp.inverse(v);
  return out;
}

Field tensor_divergence(const Field& f, const SymmetricTensorField& tensor, bool dealias_flux) {
  const GridSpec& spec = f.spec();
  require_same_spec(spec, tensor.spec());
  if (!tensor.all_finite()) throw StructuralError("metric has non-finite entries");
  const auto& sp = spectral(spec);
  const int dim = spec.dim;
  const std::size_t total = spec.size();

  const Field f_hat = to_fourier(f);
  std::vector<Field> grad;
  grad.reserve(dim);
  for (int d = 0; d < dim; ++d) grad.push_back(derivative_from_hat(f_hat, d));

  Field acc(spec);
  auto a = acc.values();
  Field flux(spec);
  auto fl = flux.values();
  const auto mask = sp.dealias_mask();
  for (int j = 0; j < dim; ++j) {
    for (std::size_t p = 0; p < total; ++p) {
      cplx s{0.0, 0.0};
      for (int k = 0; k < dim; ++k) s += tensor(p, j, k) * grad[k][p];
      fl[p] = s;
    }
    sp.forward(fl);
    const auto kj = sp.wave_vector(j);
    if (dealias_flux) {
      for (std::size_t p = 0; p < total; ++p) a[p] += cplx(0.0, kj[p]) * mask[p] * fl[p];
    } else {
      for (std::size_t p = 0; p < total; ++p) a[p] += cplx(0.0, kj[p]) * fl[p];
    }
  }
  // the masked flux already yields a masked divergence
  sp.inverse(a);
  return acc;
}

Field laplacian_G(const Field& f, const SymmetricTensorField& metric, bool dealias_flux) {
  return tensor_divergence(f, metric, dealias_flux);
}

void dealias(Field& f) {
  const auto& sp = spectral(f.spec());
  auto v = f.values();
  sp.forward(v);
  const auto mask = sp.dealias_mask();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
  sp.inverse(v);
}

Field free_evolve(const Field& f, double t) {
  const auto& sp = spectral(f.spec());
  Field out = f;
  auto v = out.values();
  sp.forward(v);
  const auto k2 = sp.k_squared();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= std::polar(1.0, -k2[i] * t);
  sp.inverse(v);
  return out;
}

cplx inner(const Field& f, const Field& g) {
  require_same_spec(f.spec(), g.spec());
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) s += std::conj(f[i]) * g[i];
  return s * f.spec().cell_volume();
}

double l2_norm(const Field& f) {
  double s = 0.0;
  for (const auto& v : f.values()) s += std::norm(v);
  return std::sqrt(s * f.spec().cell_volume());
}

double sobolev_norm(const Field& f, double s, bool homogeneous) {
  if (!(s >= 0.0)) throw DomainError("Sobolev index must be non-negative");
  const auto& sp = spectral(f.spec());
  const Field f_hat = to_fourier(f);
  const auto k2 = sp.k_squared();
  double acc = 0.0;
  for (std::size_t i = 0; i < f_hat.size(); ++i) {
    double w;
    if (homogeneous) {
      w = (s == 0.0) ? 1.0 : std::pow(k2[i], s);
    } else {
      w = std::pow(1.0 + k2[i], s);
    }
    acc += w * std::norm(f_hat[i]);
  }
  const double total = static_cast<double>(f.size());
  return std::sqrt(acc * f.spec().box_volume() / (total * total));
}

double localized_integral(const Field& f, double radius, LocalMode mode) {
  const GridSpec& spec = f.spec();
  if (!(radius < spec.half_length))
    throw DomainError("ball radius must be smaller than the box half length");
  std::vector<Field> grad;
  if (mode == LocalMode::energy) grad = gradient(f);
  double acc = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    if (norm(spec.position(p)) > radius) continue;
    const double m = std::norm(f[p]);
    switch (mode) {
      case LocalMode::density:
        acc += m;
        break;
      case LocalMode::quartic:
        acc += m * m;
        break;
      case LocalMode::energy: {
        double g = 0.0;
        for (const auto& c : grad) g += std::norm(c[p]);
        acc += g + m;
        break;
      }
    }
  }
  return acc * spec.cell_volume();
}

// ----------------------------------------------------------- weight tables

double chi_laplacian(double chi, int dim) {
  return std::pow(chi, -3) + (dim - 1) / chi;
}

double chi_bilaplacian(double chi, int dim) {
  // Delta chi = chi^-3 + (d-1) chi^-1 and, for h = chi^-p,
  // Delta h = p(p+2-d) chi^{-p-2} - p(p+2) chi^{-p-4}.
  const double c3 = 3.0 * (5 - dim) * std::pow(chi, -5) - 15.0 * std::pow(chi, -7);
  const double c1 = (3.0 - dim) * std::pow(chi, -3) - 3.0 * std::pow(chi, -5);
  return c3 + (dim - 1) * c1;
}

WeightTables weight_tables(const GridSpec& spec) {
  spec.validate();
  const int dim = spec.dim;
  const std::size_t total = spec.size();
  WeightTables w;
  w.spec = spec;
  w.chi.resize(total);
  w.grad_chi.assign(dim, RealGrid(total));
  w.hess_chi.assign(dim * dim, RealGrid(total));
  w.lap_chi.resize(total);
  w.bilap_chi.resize(total);
  w.grad_rho.assign(dim, RealGrid(total));
  w.lap_rho.resize(total);
  w.grad_lap_rho.assign(dim, RealGrid(total));

  // origin node: mean over the 2^dim half-offset neighbours; by symmetry the
  // vector kernels average to zero and |x| = dx sqrt(dim)/2 for all of them
  const double r_half = 0.5 * spec.dx() * std::sqrt(static_cast<double>(dim));

  for (std::size_t p = 0; p < total; ++p) {
    const Vec3 x = spec.position(p);
    const double r = norm(x);
    const double chi = std::sqrt(1.0 + r * r);
    w.chi[p] = chi;
    for (int i = 0; i < dim; ++i) {
      w.grad_chi[i][p] = x[i] / chi;
      for (int j = 0; j < dim; ++j) {
        w.hess_chi[i * dim + j][p] = (i == j ? 1.0 / chi : 0.0) - x[i] * x[j] / (chi * chi * chi);
      }
    }
    w.lap_chi[p] = chi_laplacian(chi, dim);
    w.bilap_chi[p] = chi_bilaplacian(chi, dim);

    if (r == 0.0) {
      w.lap_rho[p] = (dim - 1) / r_half;
      continue;
    }
    for (int i = 0; i < dim; ++i) {
      w.grad_rho[i][p] = x[i] / r;
      w.grad_lap_rho[i][p] = -(dim - 1) * x[i] / (r * r * r);
    }
    w.lap_rho[p] = (dim - 1) / r;
  }
  return w;
}

// --------------------------------------------------------------- snapshots

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes{};
  is.read(bytes.data(), bytes.size());
  if (!is) throw StructuralError("snapshot file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Field& u, double time) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open snapshot for writing: " + path.string());
  os.write("DNLS", 4);
  put_le<std::uint32_t>(os, snapshot_version);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.spec().dim));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.spec().n));
  put_le<double>(os, u.spec().half_length);
  put_le<double>(os, time);
  for (const auto& v : u.values()) {
    put_le<double>(os, v.real());
    put_le<double>(os, v.imag());
  }
  if (!os) throw std::runtime_error("failed writing snapshot: " + path.string());
}

SnapshotData read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open snapshot: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DNLS", 4) != 0) throw StructuralError("not a DNLS snapshot");
  const auto version = get_le<std::uint32_t>(is);
  if (version != snapshot_version) throw StructuralError("unsupported snapshot version");
  GridSpec spec;
  spec.dim = static_cast<int>(get_le<std::uint32_t>(is));
  spec.n = static_cast<int>(get_le<std::uint32_t>(is));
  spec.half_length = get_le<double>(is);
  const double time = get_le<double>(is);
  spec.validate();
  std::vector<cplx> values(spec.size());
  for (auto& v : values) {
    const double re = get_le<double>(is);
    const double im = get_le<double>(is);
    v = cplx(re, im);
  }
  return {Field(spec, std::move(values)), time};
}

}  // namespace dnls
