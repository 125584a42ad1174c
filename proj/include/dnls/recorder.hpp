#pragma once

// Per-snapshot recording of every functional of a run, and the derived
// residual and accumulated series.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnls/geometry.hpp"
#include "dnls/observables.hpp"
#include "dnls/scattering.hpp"
#include "dnls/solver.hpp"

namespace dnls {

struct ObservableConfig {
  int record_every = 1;
  int bilinear_every = 10;
  double local_radius = 2.0;
  double cutoff_radius = 3.0;
  double cutoff_width = 1.0;
  bool morawetz = true;
  bool lambda = true;
  bool bilinear = false;
  bool local = true;
  bool cutoff = true;
  std::vector<double> cutoff_s{0.0, 0.5};

  bool operator==(const ObservableConfig&) const = default;
};

class RunRecorder {
 public:
  /// Builds weight tables, Delta_G a, grad a and (when enabled) the cutoff.
  RunRecorder(const Geometry& geo, const ObservableConfig& cfg);

  /// Hooks for simulate(); the recorder must outlive the run.
  std::vector<Monitor> monitors();
  void record(const SimulationState& s);
  void record_bilinear(const SimulationState& s);

  const ObservableSeries& raw(const std::string& name) const;
  bool has(const std::string& name) const { return raw_.count(name) != 0; }
  const std::map<std::string, ObservableSeries>& raw_series() const { return raw_; }

  /// Residuals and running integrals computed from the raw series.
  std::map<std::string, ObservableSeries> derived() const;

  const WeightTables& weights() const { return weights_; }
  const RealGrid& lap_g_a() const { return lap_g_a_; }
  const std::optional<Cutoff>& cutoff() const { return cutoff_; }
  const ObservableConfig& config() const { return cfg_; }

 private:
  void push(const std::string& name, double t, double v);

  const Geometry* geo_;
  ObservableConfig cfg_;
  WeightTables weights_;
  RealGrid lap_g_a_;
  std::vector<RealGrid> grad_a_;
  std::optional<Cutoff> cutoff_;
  std::map<std::string, ObservableSeries> raw_;
};

/// Name of the |chi u|_{H^s} series.
std::string cutoff_series_name(double s);

}  // namespace dnls
