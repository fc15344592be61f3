// Stochastic Gross-Pitaevskii integrator with point-like atom loss.
//
//   i dpsi/dt = (-1/2 d_x^2 + g|psi|^2 - i sum_d gamma_d delta(x - x_d)) psi
//               + sum_d eta_d(t) delta(x - x_d),   <eta*(t) eta(s)> = gamma delta(t - s)
//
// One step is a Strang split: kinetic(dt/2), interaction + loss + noise (dt),
// kinetic(dt/2).  On the lattice delta(x) -> 1/dx at the drain site; the loss
// is the exact decay exp(-gamma dt/dx) and the noise is the matching exact
// Ornstein-Uhlenbeck increment, so the empty-lattice Wigner vacuum
// <|psi_j|^2> = 1/(2dx) is a fixed point for any dt.
#pragma once

#include "lbec/lattice.hpp"
#include "lbec/vacuum_sampler.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lbec {

struct DrainSpec {
  double position = 0.0;
  double gamma = 0.0;
};

enum class Scheme { split_step_spectral, semi_implicit_fd };

struct EngineConfig {
  double dt = 0.01;
  std::vector<DrainSpec> drains;
  bool noise_enabled = true;
  Units units;
  Scheme scheme = Scheme::split_step_spectral;

  /// Throws std::invalid_argument naming the violated bound.
  void validate(const GridSpec& grid) const;
  /// Largest dt allowed on `grid`: 0.1 min(dx^2, 1).
  static double max_dt(const GridSpec& grid);
};

/// Per-step variance of the noise increment added at a drain site.
double noise_increment_variance(double gamma, double dt, double dx);

class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, double time, int site)
      : std::runtime_error(what), time(time), site(site) {}
  double time;
  int site;
};

/// Integrator bound to one grid and configuration.  Owns FFT plans and
/// scratch space; one instance per worker.
class Stepper {
 public:
  Stepper(const GridSpec& grid, const EngineConfig& cfg);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  const GridSpec& grid() const { return grid_; }
  const EngineConfig& config() const { return cfg_; }

  /// One full Strang step.  `rng` may be null when noise is disabled.
  void step(ComplexField& field, RngStream* rng) const;

  /// `n_steps` Strang steps with the adjacent kinetic half steps merged.
  /// Equivalent to calling step() n_steps times.  `after_step`, if given, sees
  /// the field after the interaction substep of every step (kinetic half step
  /// still pending) and is meant for cheap diagnostics only.
  void advance(ComplexField& field, int n_steps, RngStream* rng,
               const std::function<void(const ComplexField&, int)>& after_step = {}) const;

  /// sum_j [ |d_x psi|^2 / 2 + g |psi|^4 / 2 ] dx, kinetic part spectral
  /// (or finite difference for the FD scheme).
  double energy(const ComplexField& field) const;

  std::vector<int> drain_sites() const;

 private:
  struct Impl;
  GridSpec grid_;
  EngineConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

/// Free-function form of a single step.
ComplexField step(ComplexField field, const EngineConfig& cfg, RngStream& rng);

struct RunPlan {
  double t_end = 0.0;
  /// Snapshot times; increasing, multiples of dt, each <= t_end.
  std::vector<double> schedule;
  /// Record N_W and drain densities every this many steps (0 disables).
  int norm_every = 10;
};

struct TrajectoryRecord {
  bool aborted = false;
  std::string abort_reason;
  double abort_time = 0.0;
  std::uint64_t final_hash = 0;
  ComplexField final_field;
  std::vector<double> norm_times;
  std::vector<double> norms;
  /// |psi|^2 at the first drain site, sampled with the norms.
  std::vector<double> drain_density;
  /// Number of snapshots delivered before any abort.
  int snapshots_delivered = 0;
};

using SnapshotSink = std::function<void(int snapshot_index, const ComplexField&)>;

/// Integrates from `init` to plan.t_end, delivering snapshots to every sink.
/// Aborts (record flagged, no exception) on NaN/Inf or when N_W exceeds ten
/// times its initial value.
TrajectoryRecord run_trajectory(const ComplexField& init, const Stepper& stepper,
                                const RunPlan& plan, std::span<const SnapshotSink> sinks,
                                RngStream* rng);

TrajectoryRecord run_trajectory(const VacuumSample& init, const EngineConfig& cfg,
                                const RunPlan& plan, std::span<const SnapshotSink> sinks,
                                RngStream& rng);

/// Associative, commutative accumulator over trajectory snapshots.
class Reducer {
 public:
  virtual ~Reducer() = default;
  /// Empty accumulator of the same kind and shape.
  virtual std::unique_ptr<Reducer> fresh() const = 0;
  virtual void observe(int snapshot_index, const ComplexField& field) = 0;
  /// Called once per completed trajectory, after its snapshots.
  virtual void end_trajectory() {}
  virtual void merge(const Reducer& other) = 0;
};

enum class InitialState {
  bogoliubov_vacuum,  // Wigner-sampled ground state
  mean_field,         // psi = sqrt(n0), no fluctuations
  empty_vacuum,       // no condensate, half a quantum per mode
};

struct EnsemblePlan {
  GridSpec grid;
  EngineConfig engine;
  InitialState initial = InitialState::bogoliubov_vacuum;
  double cutoff_k = 0.0;  // 0 selects pi/dx
  RunPlan run;
  int n_traj = 1;
  std::uint64_t seed = 1;
  /// Trajectory i uses stream first_trajectory + i; lets an ensemble be split
  /// into batches that concatenate exactly.
  std::uint64_t first_trajectory = 0;
  int workers = 1;
  /// Trajectories per reduction block.  The block layout, not the worker
  /// count, fixes the summation order, so results are bitwise identical for
  /// any number of workers.
  int block_size = 8;
};

struct EnsembleStats {
  int n_completed = 0;
  int n_aborted = 0;
  std::vector<std::string> abort_reasons;
  std::uint64_t combined_hash = 0;
};

/// Initial field of trajectory `stream` for the plan's initial state.
ComplexField initial_field(const EnsemblePlan& plan, RngStream& rng);

/// Runs plan.n_traj trajectories and merges each reducer in block order.
/// Throws if more than 1% of trajectories abort.
EnsembleStats run_ensemble(const EnsemblePlan& plan, std::span<Reducer* const> reducers);

}  // namespace lbec
