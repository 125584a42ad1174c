#include "dnls/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "dnls/errors.hpp"

namespace dnls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  const std::string s = trim(v);
  if (s.empty()) throw ConfigError("expected a number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(x))
    throw ConfigError("expected a finite number, got '" + s + "'");
  return x;
}

long long to_integer(const std::string& v) {
  const std::string s = trim(v);
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError("expected an integer, got '" + s + "'");
  return x;
}

int to_int(const std::string& v) {
  const long long x = to_integer(v);
  if (x < -1000000000LL || x > 1000000000LL) throw ConfigError("integer out of range: " + v);
  return static_cast<int>(x);
}

bool to_bool(const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw ConfigError("expected true/false, got '" + s + "'");
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  const std::string s = trim(v);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  return out;
}

Vec3 to_vec3(const std::string& v) {
  const auto list = to_list(v);
  if (list.empty() || list.size() > 3) throw ConfigError("expected 1 to 3 comma-separated numbers");
  Vec3 out{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < list.size(); ++i) out[i] = list[i];
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out;
}

std::string fmt(const Vec3& v) { return fmt(std::vector<double>(v.begin(), v.end())); }
std::string fmt(bool b) { return b ? "true" : "false"; }

InitialKind parse_initial_kind(const std::string& s) {
  if (s == "gaussian") return InitialKind::gaussian;
  if (s == "plane_wave") return InitialKind::plane_wave;
  throw ConfigError("unknown initial kind '" + s + "' (gaussian, plane_wave)");
}

std::string to_string(InitialKind k) { return k == InitialKind::gaussian ? "gaussian" : "plane_wave"; }

EnsembleSpec::Kind parse_ensemble_kind(const std::string& s) {
  if (s == "random") return EnsembleSpec::Kind::random;
  if (s == "lattice") return EnsembleSpec::Kind::lattice;
  throw ConfigError("unknown ensemble '" + s + "' (random, lattice)");
}

std::string to_string(EnsembleSpec::Kind k) { return k == EnsembleSpec::Kind::random ? "random" : "lattice"; }

struct Key {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DNLS_KEY(sec, key, setter, getter) \
  Key { sec, key, [](RunConfig& c, const std::string& v) { setter; }, [](const RunConfig& c) { return getter; } }

// Keys in serialization order. geometry.preset is applied before the other
// keys so that explicit values override the preset defaults.
const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      DNLS_KEY("grid", "dim", c.grid.dim = to_int(v), std::to_string(c.grid.dim)),
      DNLS_KEY("grid", "n", c.grid.n = to_int(v), std::to_string(c.grid.n)),
      DNLS_KEY("grid", "L", c.grid.half_length = to_double(v), fmt(c.grid.half_length)),

      DNLS_KEY("geometry", "preset", c.preset = parse_preset(trim(v)), to_string(c.preset)),
      DNLS_KEY("geometry", "beta", c.geometry.beta = to_double(v), fmt(c.geometry.beta)),
      DNLS_KEY("geometry", "beta_perp", c.geometry.beta_perp = to_double(v), fmt(c.geometry.beta_perp)),
      DNLS_KEY("geometry", "radius", c.geometry.radius = to_double(v), fmt(c.geometry.radius)),
      DNLS_KEY("geometry", "shape", c.geometry.shape = parse_shape(trim(v)), to_string(c.geometry.shape)),
      DNLS_KEY("geometry", "ring_radius", c.geometry.ring_radius = to_double(v), fmt(c.geometry.ring_radius)),
      DNLS_KEY("geometry", "center", c.geometry.center = to_vec3(v), fmt(c.geometry.center)),
      DNLS_KEY("geometry", "damping_amplitude", c.geometry.damping_amplitude = to_double(v),
               fmt(c.geometry.damping_amplitude)),
      DNLS_KEY("geometry", "damping_inner", c.geometry.damping_inner = to_double(v),
               fmt(c.geometry.damping_inner)),
      DNLS_KEY("geometry", "damping_outer", c.geometry.damping_outer = to_double(v),
               fmt(c.geometry.damping_outer)),
      DNLS_KEY("geometry", "damping_width", c.geometry.damping_width = to_double(v),
               fmt(c.geometry.damping_width)),
      DNLS_KEY("geometry", "g_tol", c.geometry.g_tol = to_double(v), fmt(c.geometry.g_tol)),
      DNLS_KEY("geometry", "a_min", c.geometry.a_min = to_double(v), fmt(c.geometry.a_min)),

      DNLS_KEY("initial", "kind", c.initial.kind = parse_initial_kind(trim(v)), to_string(c.initial.kind)),
      DNLS_KEY("initial", "amplitude", c.initial.amplitude = to_double(v), fmt(c.initial.amplitude)),
      DNLS_KEY("initial", "width", c.initial.width = to_double(v), fmt(c.initial.width)),
      DNLS_KEY("initial", "center", c.initial.center = to_vec3(v), fmt(c.initial.center)),
      DNLS_KEY("initial", "momentum", c.initial.momentum = to_vec3(v), fmt(c.initial.momentum)),

      DNLS_KEY("solver", "scheme", c.solver.scheme = parse_scheme(trim(v)), to_string(c.solver.scheme)),
      DNLS_KEY("solver", "dt", c.solver.dt = to_double(v), fmt(c.solver.dt)),
      DNLS_KEY("solver", "T", c.solver.T = to_double(v), fmt(c.solver.T)),
      DNLS_KEY("solver", "dealias", c.solver.dealias = to_bool(v), fmt(c.solver.dealias)),
      DNLS_KEY("solver", "nonlinear", c.solver.nonlinear = to_bool(v), fmt(c.solver.nonlinear)),
      DNLS_KEY("solver", "inner_perturbation_steps", c.solver.inner_perturbation_steps = to_int(v),
               std::to_string(c.solver.inner_perturbation_steps)),
      DNLS_KEY("solver", "boundary_mass_warn", c.solver.boundary_mass_warn = to_double(v),
               fmt(c.solver.boundary_mass_warn)),
      DNLS_KEY("solver", "snapshot_every", c.snapshot_every = to_int(v), std::to_string(c.snapshot_every)),

      DNLS_KEY("observables", "record_every", c.observables.record_every = to_int(v),
               std::to_string(c.observables.record_every)),
      DNLS_KEY("observables", "bilinear_every", c.observables.bilinear_every = to_int(v),
               std::to_string(c.observables.bilinear_every)),
      DNLS_KEY("observables", "morawetz", c.observables.morawetz = to_bool(v), fmt(c.observables.morawetz)),
      DNLS_KEY("observables", "lambda", c.observables.lambda = to_bool(v), fmt(c.observables.lambda)),
      DNLS_KEY("observables", "bilinear", c.observables.bilinear = to_bool(v), fmt(c.observables.bilinear)),
      DNLS_KEY("observables", "local", c.observables.local = to_bool(v), fmt(c.observables.local)),
      DNLS_KEY("observables", "cutoff", c.observables.cutoff = to_bool(v), fmt(c.observables.cutoff)),
      DNLS_KEY("observables", "local_radius", c.observables.local_radius = to_double(v),
               fmt(c.observables.local_radius)),
      DNLS_KEY("observables", "cutoff_radius", c.observables.cutoff_radius = to_double(v),
               fmt(c.observables.cutoff_radius)),
      DNLS_KEY("observables", "cutoff_width", c.observables.cutoff_width = to_double(v),
               fmt(c.observables.cutoff_width)),
      DNLS_KEY("observables", "cutoff_s", c.observables.cutoff_s = to_list(v), fmt(c.observables.cutoff_s)),

      DNLS_KEY("scattering", "s_list", c.scattering.s_list = to_list(v), fmt(c.scattering.s_list)),
      DNLS_KEY("scattering", "snapshot_times", c.scattering.snapshot_times = to_list(v),
               fmt(c.scattering.snapshot_times)),
      DNLS_KEY("scattering", "tol_mono", c.scattering.tol_mono = to_double(v), fmt(c.scattering.tol_mono)),

      DNLS_KEY("rays", "ensemble", c.rays.kind = parse_ensemble_kind(trim(v)), to_string(c.rays.kind)),
      DNLS_KEY("rays", "count", c.rays.count = to_int(v), std::to_string(c.rays.count)),
      DNLS_KEY("rays", "lattice_points", c.rays.lattice_points = to_int(v),
               std::to_string(c.rays.lattice_points)),
      DNLS_KEY("rays", "lattice_directions", c.rays.lattice_directions = to_int(v),
               std::to_string(c.rays.lattice_directions)),
      DNLS_KEY("rays", "sample_radius", c.rays.sample_radius = to_double(v), fmt(c.rays.sample_radius)),
      DNLS_KEY("rays", "horizon", c.rays.horizon = to_double(v), fmt(c.rays.horizon)),
      DNLS_KEY("rays", "dt", c.rays.dt = to_double(v), fmt(c.rays.dt)),
      DNLS_KEY("rays", "r_escape", c.rays.r_escape = to_double(v), fmt(c.rays.r_escape)),

      DNLS_KEY("run", "output", c.output = trim(v), c.output),
      DNLS_KEY("run", "seed", c.seed = static_cast<std::uint64_t>(to_integer(v)), std::to_string(c.seed)),
  };
  return keys;
}

#undef DNLS_KEY

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : registry())
    if (k.section == section && k.name == name) return &k;
  return nullptr;
}

bool known_section(const std::string& s) {
  for (const auto& k : registry())
    if (k.section == s) return true;
  return false;
}

int line_of(const RunConfig& cfg, const std::string& key) {
  const auto it = cfg.key_lines.find(key);
  return it == cfg.key_lines.end() ? 0 : it->second;
}

[[noreturn]] void fail(const RunConfig& cfg, const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what, line_of(cfg, key));
}

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const {
  return grid == o.grid && preset == o.preset && geometry == o.geometry && initial == o.initial &&
         solver == o.solver && snapshot_every == o.snapshot_every && observables == o.observables &&
         scattering == o.scattering && rays == o.rays && output == o.output && seed == o.seed;
}

RunConfig parse_config_text(const std::string& text) {
  struct Entry {
    const Key* key;
    std::string value;
    int line;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto c = s.find_first_of("#;"); c != std::string::npos) s.erase(c);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string name = trim(s.substr(0, eq));
    const Key* key = find_key(section, name);
    if (!key) throw ConfigError("unknown key '" + name + "' in [" + section + "]", line);
    const std::string full = section + "." + name;
    if (!seen.insert(full).second) throw ConfigError("duplicate key '" + full + "'", line);
    entries.push_back({key, trim(s.substr(eq + 1)), line});
  }

  RunConfig cfg;
  auto apply = [&](const Entry& e) {
    try {
      e.key->set(cfg, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(e.key->section + "." + e.key->name + ": " + err.what(), e.line);
    } catch (const std::exception& err) {
      throw ConfigError(e.key->section + "." + e.key->name + ": " + err.what(), e.line);
    }
    cfg.key_lines[e.key->section + "." + e.key->name] = e.line;
  };
  for (const auto& e : entries)
    if (e.key->section == "geometry" && e.key->name == "preset") {
      apply(e);
      cfg.geometry = preset_defaults(cfg.preset);
    }
  for (const auto& e : entries)
    if (!(e.key->section == "geometry" && e.key->name == "preset")) apply(e);

  validate_config(cfg);
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const RunConfig& cfg) {
  try {
    cfg.grid.validate();
  } catch (const std::exception& e) {
    fail(cfg, "grid.n", e.what());
  }
  const double L = cfg.grid.half_length;
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    fail(cfg, "solver.dt", e.what());
  }
  if (cfg.snapshot_every < 0) fail(cfg, "solver.snapshot_every", "must be >= 0");

  const auto& o = cfg.observables;
  if (o.record_every < 1) fail(cfg, "observables.record_every", "must be >= 1");
  if (o.bilinear_every < 1) fail(cfg, "observables.bilinear_every", "must be >= 1");
  if (!(o.local_radius > 0.0) || o.local_radius >= L)
    fail(cfg, "observables.local_radius", "the ball B(0, R) must fit in the box: need 0 < R < L");
  if (o.cutoff && (!(o.cutoff_width > 0.0) || !(o.cutoff_radius >= 0.0) ||
                   o.cutoff_radius + o.cutoff_width >= L))
    fail(cfg, "observables.cutoff_radius", "cutoff support radius + width must be < L");
  for (double s : o.cutoff_s)
    if (!(s >= 0.0) || s >= 1.0) fail(cfg, "observables.cutoff_s", "local Sobolev indices must lie in [0, 1)");

  const auto& sc = cfg.scattering;
  for (double s : sc.s_list)
    if (!(s >= 0.0)) fail(cfg, "scattering.s_list", "Sobolev indices must be >= 0");
  for (std::size_t i = 0; i < sc.snapshot_times.size(); ++i) {
    const double t = sc.snapshot_times[i];
    if (!(t >= 0.0) || t > std::abs(cfg.solver.T) + 1e-12)
      fail(cfg, "scattering.snapshot_times", "snapshot times must lie in [0, |T|]");
    if (i > 0 && !(t > sc.snapshot_times[i - 1]))
      fail(cfg, "scattering.snapshot_times", "snapshot times must increase");
  }
  if (!(sc.tol_mono >= 0.0)) fail(cfg, "scattering.tol_mono", "must be >= 0");

  const auto& r = cfg.rays;
  if (r.count < 1) fail(cfg, "rays.count", "must be >= 1");
  if (r.lattice_points < 1 || r.lattice_directions < 1)
    fail(cfg, "rays.lattice_points", "lattice sizes must be >= 1");
  if (!(r.sample_radius > 0.0)) fail(cfg, "rays.sample_radius", "must be > 0");
  if (!(r.horizon > 0.0)) fail(cfg, "rays.horizon", "must be > 0");
  if (!(r.dt > 0.0)) fail(cfg, "rays.dt", "must be > 0");
  if (r.r_escape < 0.0) fail(cfg, "rays.r_escape", "must be >= 0 (0 selects the default)");

  const auto& in = cfg.initial;
  if (!(in.width > 0.0)) fail(cfg, "initial.width", "must be > 0");

  Geometry geo;
  try {
    geo = build_preset(cfg.preset, cfg.geometry, cfg.grid);
  } catch (const std::exception& e) {
    fail(cfg, "geometry.preset", e.what());
  }
  if (cfg.solver.scheme == Scheme::rk4_mol) {
    const double bound = cfl_suggestion(cfg.grid, geo.metric, cfg.solver);
    if (cfg.solver.dt > bound) {
      std::ostringstream os;
      os << "dt = " << cfg.solver.dt << " exceeds the rk4_mol stability bound " << bound;
      fail(cfg, "solver.dt", os.str());
    }
  }
  if (o.cutoff) {
    try {
      make_cutoff(cfg.grid, o.cutoff_radius, o.cutoff_width, geo.damping, cfg.geometry.a_min);
    } catch (const std::exception& e) {
      fail(cfg, "observables.cutoff_radius", e.what());
    }
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : registry()) {
    if (k.section != section) {
      if (!section.empty()) os << "\n";
      section = k.section;
      os << "[" << section << "]\n";
    }
    os << k.name << " = " << k.get(cfg) << "\n";
  }
  return os.str();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EnsembleSpec ensemble_spec(const RunConfig& cfg) {
  EnsembleSpec e;
  e.kind = cfg.rays.kind;
  e.count = cfg.rays.count;
  e.lattice_points = cfg.rays.lattice_points;
  e.lattice_directions = cfg.rays.lattice_directions;
  e.sample_radius = cfg.rays.sample_radius;
  e.seed = cfg.seed;
  return e;
}

Field initial_field(const RunConfig& cfg) {
  const auto& in = cfg.initial;
  const GridSpec& spec = cfg.grid;
  if (in.kind == InitialKind::plane_wave) {
    Vec3 k{0.0, 0.0, 0.0};
    const double k0 = std::numbers::pi / spec.half_length;
    for (int d = 0; d < spec.dim; ++d) k[d] = k0 * std::round(in.momentum[d] / k0);
    return Field::from_function(spec, [&](const Vec3& x) {
      return in.amplitude * std::polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
    });
  }
  return Field::from_function(spec, [&](const Vec3& x) {
    double r2 = 0.0, phase = 0.0;
    for (int d = 0; d < spec.dim; ++d) {
      const double y = x[d] - in.center[d];
      r2 += y * y;
      phase += in.momentum[d] * x[d];
    }
    return in.amplitude * std::exp(-0.5 * r2 / (in.width * in.width)) * std::polar(1.0, phase);
  });
}

}  // namespace dnls
