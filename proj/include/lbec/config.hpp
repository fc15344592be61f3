// Scenario configuration: a flat key = value text with [sections].
//
//   # comment            ; comment
//   [physics]
//   gamma = 0.1          lists are comma separated: gamma = 0.5, 0.55, 0.6
//
// Unknown sections or keys are fatal.  Every key has a default; the resolved
// configuration (dump_config) lists all of them and parses back to the same
// value.
#pragma once

#include "lbec/gpe_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbec {

enum class ScenarioKind { single_drain, two_drain, critical_scan, scattering_scan, gamma_sweep };

struct ScenarioInfo {
  ScenarioKind kind;
  const char* name;
  const char* summary;
};
const std::vector<ScenarioInfo>& scenario_catalog();
ScenarioKind scenario_from_name(const std::string& name);
std::string scenario_name(ScenarioKind k);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  // [run]
  ScenarioKind scenario = ScenarioKind::single_drain;

  // [physics]
  std::vector<double> gamma{0.1};
  double drain_separation = 60.0;  // two_drain only; drains at +-L/2
  double n0_xi = 10.0;

  // [numerics]
  int n_sites = 4096;
  double dx = 0.5;
  double dt = 0.01;
  double t_max = 200.0;
  std::vector<double> snapshots{0.0, 100.0, 200.0};
  Scheme scheme = Scheme::split_step_spectral;
  Boundary boundary = Boundary::periodic;
  double cutoff_k = 0.0;  // 0: pi/dx
  InitialState initial = InitialState::bogoliubov_vacuum;
  bool noise = true;

  // [ensemble]
  int n_traj = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  int block_size = 8;
  int keep_trajectories = 0;  // single realizations written out in full

  // [observables]
  bool fluctuations = false;
  bool g2 = false;
  double g2_half_width = 100.0;
  double flow_window_lo = 5.0;
  double flow_window_hi = 60.0;

  // [scattering]
  double omega_min = 1e-3;
  double omega_max = 10.0;
  int n_omega = 61;
  double n_asym = 1.0;

  // [output]
  std::string directory = "out";
  bool write_binary = true;
  bool write_csv = true;

  std::vector<DrainSpec> drains() const;
  GridSpec grid() const;
  EngineConfig engine(double gamma) const;
  EnsemblePlan plan(double gamma) const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and validates; throws ConfigError naming the line or the violated bound.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Physical and numerical bounds (dt stability, causal box, drains on sites).
void validate_config(const ScenarioConfig& cfg);

/// Fully resolved text form; parse_config(dump_config(c)) == c.
std::string dump_config(const ScenarioConfig& cfg);

/// FNV-1a of the resolved text, 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace lbec
