// Closed-form stationary states, the critical point and thermal-emission
// predictions.  Densities here are relative to n0 (so g n = n and c^2 = n);
// psi is normalized to |psi|^2 = n.
#pragma once

#include "lbec/lattice.hpp"

#include <vector>

namespace lbec {

enum class FlowRegime { subcritical, critical, supercritical };

struct StationaryProfile {
  FlowRegime regime = FlowRegime::subcritical;
  double gamma = 0.0;
  double n = 1.0;      // homogeneous / asymptotic density
  double v = 0.0;      // flow speed towards the drain
  double mu = 1.0;
  double alpha = 1.0;  // inverse Lorentz factor, supercritical only

  double sound_speed() const;
  /// Stationary amplitude; the full state is psi(x) exp(-i mu t).
  cplx psi(double x) const;
  double density(double x) const;
  /// Spatial phase arg psi(x), continuous in x, zero at x = 0 for the
  /// subcritical state.
  double phase(double x) const;
  /// d(phase)/dx, analytic.
  double velocity(double x) const;
};

/// S = -gamma |x|, homogeneous n, mu = gamma^2/2 + g n.
StationaryProfile subcritical_state(double gamma, double n = 1.0);

/// Grey-soliton pair sqrt(n)(i v/c + alpha tanh(alpha c |x|)) exp(-i v |x|)
/// with v = c^2/gamma, alpha = sqrt(1 - v^2/c^2), mu = n alpha^2 + 3 v^2/2.
StationaryProfile supercritical_state(double gamma, double n_asym = 1.0);

struct CriticalPoint {
  double gamma_c = 2.0 / 3.0;
  // Reported exponents; stored, not fitted.
  static constexpr double nu = 0.5;
  static constexpr double z = 1.0;
};

double critical_gamma(double c0 = 1.0);

/// Thomas-Fermi critical state, valid for |x| <= c0 t and equal to the
/// unperturbed state outside:
///   n = (4 n0/9)(|x|/(2 c0 t) + 1)^2,   S = (c0^2 t/3)(|x|/(c0 t) - 1)^2 - c0^2 t.
struct CriticalProfile {
  double t, n0, c0;
  double density(double x) const;
  double phase(double x) const;
  double velocity(double x) const;
};
CriticalProfile critical_profile(double t, double n0 = 1.0, double c0 = 1.0);

/// Inverse acoustic metric g^{mu nu} = [[1, v], [v, v^2 - c^2]] per sample.
struct AcousticMetric {
  std::vector<double> x;
  std::vector<double> g00, g01, g11;
  std::vector<double> horizons;  // roots of v^2 = c^2, linearly interpolated
};
AcousticMetric acoustic_metric(const std::vector<double>& x, const std::vector<double>& v,
                               const std::vector<double>& c);
AcousticMetric acoustic_metric(const StationaryProfile& p, const std::vector<double>& x);

/// k_B T = v/(1 + v) mu, with v in units of c0.
double hawking_temperature(double v, double mu);

/// n_out = (1/2) v/(1+v) ((1 - v) t - |x|) inside the wedge, zero outside.
double fluctuation_wedge_prediction(double v, double x, double t);

}  // namespace lbec
