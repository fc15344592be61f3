// Named experiments: each scenario runs the engine/observable/analytics
// pipeline for a resolved configuration and persists its datasets plus a
// manifest into the output directory.
#pragma once

#include "lbec/config.hpp"
#include "lbec/observables.hpp"
#include "lbec/persist.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace lbec {

/// Keeps the snapshots of the first `limit` completed trajectories (in
/// trajectory order, since merges happen in block order).
class SnapshotCollector final : public Reducer {
 public:
  explicit SnapshotCollector(int limit);
  std::unique_ptr<Reducer> fresh() const override;
  void observe(int snapshot, const ComplexField& field) override;
  void end_trajectory() override;
  void merge(const Reducer& other) override;

  /// [trajectory][snapshot]
  const std::vector<std::vector<ComplexField>>& trajectories() const { return done_; }

 private:
  int limit_;
  std::vector<ComplexField> current_;
  std::vector<std::vector<ComplexField>> done_;
};

/// Noise-free run of the plan's engine from the uniform condensate; one field
/// per scheduled snapshot.
std::vector<ComplexField> mean_field_snapshots(const EnsemblePlan& plan);

/// Profile series of single deterministic fields (no Weyl subtraction, zero
/// errors).
ProfileSeries deterministic_profile_series(const std::vector<double>& times,
                                           const std::vector<ComplexField>& fields);

/// Mean-field or ensemble profiles for the plan, whichever its settings call
/// for (no noise and a mean-field start means one deterministic run).
ProfileSeries run_profiles(const EnsemblePlan& plan, EnsembleStats* stats = nullptr);

struct DrainState {
  double flow_speed = 0.0;     // from the phase slope over the window
  double window_density = 0.0;  // mean density over the window, units of n0
  double drain_density = 0.0;   // at the drain site, units of n0
};
DrainState measure_drain_state(const ProfileSeries& ps, int snapshot, double n0, double lo, double hi);

/// Location of the maximum of y(x), refined by a parabola through the three
/// samples around the largest one.
double locate_cusp(const std::vector<double>& x, const std::vector<double>& y);

/// Relative L2 deviation of the rescaled density n/n0 and phase
/// (phi(x) - phi(far field)) / t from the Thomas-Fermi critical profile over
/// |x| < fraction * c0 t, for one snapshot.
struct CollapseDeviation {
  double t = 0.0;
  double density = 0.0;
  double phase = 0.0;
};
CollapseDeviation critical_collapse(const ProfileSeries& ps, int snapshot, double n0,
                                    double fraction = 0.9);

/// Runs the scenario, writes datasets, resolved config and manifest.json into
/// cfg.directory.  On failure writes failure.json (and a manifest with status
/// "failed") and rethrows.
RunManifest run_scenario(const ScenarioConfig& cfg, std::ostream* log = nullptr);

}  // namespace lbec
