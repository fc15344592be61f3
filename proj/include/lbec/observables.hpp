// Ensemble reducers and the derived profiles: Weyl-corrected density,
// per-trajectory phase, flow velocity, condensate fluctuations and the
// normal-ordered density-density correlation map.
#pragma once

#include "lbec/gpe_engine.hpp"

#include <optional>
#include <vector>

namespace lbec {

/// Mean and standard error, [snapshot][site].
struct Estimate {
  Eigen::ArrayXXd mean;
  Eigen::ArrayXXd stderr_;
};

/// Accumulates |psi_j|^2 and its square for every snapshot.
class DensityReducer final : public Reducer {
 public:
  DensityReducer(int n_snapshots, const GridSpec& grid);
  std::unique_ptr<Reducer> fresh() const override;
  void observe(int snapshot, const ComplexField& field) override;
  void merge(const Reducer& other) override;

  const GridSpec& grid() const { return grid_; }
  int n_snapshots() const { return static_cast<int>(count_.size()); }
  const std::vector<long>& counts() const { return count_; }
  const Eigen::ArrayXXd& sum() const { return sum_; }
  const Eigen::ArrayXXd& sum_sq() const { return sum_sq_; }

 private:
  GridSpec grid_;
  std::vector<long> count_;
  Eigen::ArrayXXd sum_, sum_sq_;
};

/// Condensate density <|psi_j|^2> - 1/(2 dx).  Throws with fewer than two
/// trajectories.
Estimate density_profile(const DensityReducer& r);

/// Phase of each trajectory unwrapped from the reference site (the left
/// edge) by nearest-branch accumulation, then averaged.  Sites whose density
/// falls below 1e-3 n0 are counted as unreliable.
class PhaseReducer final : public Reducer {
 public:
  PhaseReducer(int n_snapshots, const GridSpec& grid, double n0, int reference_site = 0);
  std::unique_ptr<Reducer> fresh() const override;
  void observe(int snapshot, const ComplexField& field) override;
  void merge(const Reducer& other) override;

  const GridSpec& grid() const { return grid_; }
  int reference_site() const { return ref_; }
  const std::vector<long>& counts() const { return count_; }
  const Eigen::ArrayXXd& sum() const { return sum_; }
  const Eigen::ArrayXXd& sum_sq() const { return sum_sq_; }
  /// Number of (trajectory, site) samples flagged unreliable, [snapshot][site].
  const Eigen::ArrayXXi& unreliable() const { return unreliable_; }

 private:
  GridSpec grid_;
  double threshold_;
  int ref_;
  std::vector<long> count_;
  Eigen::ArrayXXd sum_, sum_sq_;
  Eigen::ArrayXXi unreliable_;
};

/// Single-field unwrapped phase relative to `reference_site`.
Eigen::ArrayXd unwrapped_phase(const ComplexField& field, int reference_site = 0);

Estimate phase_profile(const PhaseReducer& r);

/// Centered finite-difference gradient, one-sided at the ends.
Eigen::ArrayXd flow_velocity(const Eigen::ArrayXd& phase, const GridSpec& grid);

struct ProfileSeries {
  std::vector<double> times;
  GridSpec grid;
  Estimate density;
  Estimate phase;
  Eigen::ArrayXXd velocity;  // from the mean phase
};

ProfileSeries make_profile_series(const std::vector<double>& times, const DensityReducer& d,
                                  const PhaseReducer& p);

/// Accumulates d = psi - psi_ref for every snapshot, where psi_ref is a
/// deterministic reference (typically the noise-free mean-field run).  The
/// fluctuation <|psi - <psi>|^2> = <|d|^2> - |<d>|^2 does not depend on the
/// reference; the reference only keeps the sums well conditioned.
class FluctuationReducer final : public Reducer {
 public:
  explicit FluctuationReducer(std::vector<ComplexField> reference);
  std::unique_ptr<Reducer> fresh() const override;
  void observe(int snapshot, const ComplexField& field) override;
  void merge(const Reducer& other) override;

  const std::vector<ComplexField>& reference() const { return ref_; }
  const std::vector<long>& counts() const { return count_; }
  const Eigen::ArrayXXcd& sum_d() const { return sum_d_; }
  const Eigen::ArrayXXd& sum_d2() const { return sum_d2_; }
  const Eigen::ArrayXXd& sum_d4() const { return sum_d4_; }

 private:
  std::vector<ComplexField> ref_;
  std::vector<long> count_;
  Eigen::ArrayXXcd sum_d_;
  Eigen::ArrayXXd sum_d2_, sum_d4_;
};

struct FluctuationWedge {
  std::vector<double> times;
  Eigen::ArrayXXd n_out;  // [snapshot][site], baseline subtracted
  Eigen::ArrayXXd stderr_;
  int baseline_snapshot = 0;
};

/// n_out(x, t) = <|delta psi|^2>_t - <|delta psi|^2>_baseline.  The Weyl
/// half quanta cancel in the difference.
FluctuationWedge fluctuation_wedge(const FluctuationReducer& r, int baseline_snapshot = 0);

/// Accumulates first and second moments of n_j = |psi_j|^2 over a window of
/// sites for every snapshot.
class G2Reducer final : public Reducer {
 public:
  G2Reducer(int n_snapshots, const GridSpec& grid, int first_site, int n_window);
  std::unique_ptr<Reducer> fresh() const override;
  void observe(int snapshot, const ComplexField& field) override;
  void merge(const Reducer& other) override;

  const GridSpec& grid() const { return grid_; }
  int first_site() const { return first_; }
  int window() const { return n_; }
  const std::vector<long>& counts() const { return count_; }

  /// <|psi_j|^2> over the window (Weyl symbol).
  Eigen::VectorXd mean_density(int snapshot) const;
  /// Normal-ordered connected correlator <:dn(x) dn(x'):> at one snapshot.
  Eigen::MatrixXd normal_ordered_covariance(int snapshot) const;

 private:
  GridSpec grid_;
  int first_, n_;
  std::vector<long> count_;
  std::vector<Eigen::VectorXd> s1_;
  std::vector<Eigen::MatrixXd> s2_;  // lower triangle maintained
};

struct CorrelationMap {
  std::vector<double> x;
  Eigen::MatrixXd g2;
  bool reference_subtracted = true;
  /// |mean diagonal of the baseline g2|; the map is divided by it.
  double normalization = 1.0;
  long n_traj = 0;
  /// Typical shot-noise level of an off-diagonal entry after normalization.
  double noise_estimate = 0.0;
};

/// Connected g2(x, x') = <:dn(x) dn(x'):> / (<n(x)> <n(x')>) with normal-ordered
/// densities, over the reducer window.
Eigen::MatrixXd connected_g2(const G2Reducer& r, int snapshot);

/// (g2(t) - g2(baseline)) / |<diag g2(baseline)>|, exactly symmetric.  If
/// `normalization` is given it replaces the baseline diagonal (lets batches
/// share one scale).
CorrelationMap g2_map(const G2Reducer& r, int snapshot, int baseline_snapshot = 0,
                      std::optional<double> normalization = std::nullopt);

/// Band averages of a correlation map over x_min < |x| < x_max:
///   diagonal       |x - x'| <= half_width
///   anti_diagonal  |x + x'| <= half_width
///   local_*        local_lo <= |x'| <= local_hi, x' on the same / opposite
///                  side of the drain as x
struct G2Bands {
  double diagonal = 0.0, anti_diagonal = 0.0;
  double local_same = 0.0, local_opposite = 0.0;
};
G2Bands g2_bands(const CorrelationMap& map, double x_min, double x_max, double half_width = 1.0,
                 double local_lo = 0.5, double local_hi = 2.0);

// ---------------------------------------------------------------------------
// fits

struct LineFit {
  double slope = 0.0, intercept = 0.0;
  double slope_error = 0.0;  // from the residual scatter
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Least-squares fit of y = base + slope * max(0, kink - |x|) over |x| in the
/// given samples; slope is reported positive for a wedge peaked at x = 0.
struct WedgeFit {
  double slope = 0.0, kink = 0.0, base = 0.0;
};
WedgeFit fit_wedge(const std::vector<double>& abs_x, const std::vector<double>& y,
                   double kink_lo, double kink_hi);

/// Flow speed towards the drain at x = 0 from the mean phase: average of the
/// left and right phase slopes over lo <= |x| <= hi.
double drain_flow_speed(const Eigen::ArrayXd& phase, const GridSpec& grid, double lo, double hi);

/// Local density minima in (x_lo, x_hi) whose depth below the surrounding
/// maximum (within +-half_window) exceeds `min_depth` (fractional).
std::vector<double> find_density_minima(const Eigen::ArrayXd& density, const GridSpec& grid,
                                        double x_lo, double x_hi, double min_depth,
                                        double half_window = 5.0);

}  // namespace lbec
