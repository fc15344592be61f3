// Bogoliubov-de Gennes scattering off a point drain.
//
// Far from the drain the background is a plane wave psi0 = sqrt(n) e^{i w x}
// with flow w = +v on the left (towards the drain) and w = -v on the right.
// Fluctuations are written as
//     u(x) = U e^{i(k + w)x},   v(x) = V e^{i(k - w)x}
// and (U, V) solve the 2x2 BdG block in the comoving frame, which gives
//     (omega - w k)^2 = (k^2/2 + c^2)^2 - c^4,   c^2 = g n.
//
// All scattering quantities are computed in units of the asymptotic density
// (c = 1); the public functions take n and rescale.  The S-matrix maps the
// inputs {A_in, B_in, eta, eta~} to the outputs {A_out, B_out, A_loc, B_loc}
// (A: left, B: right).  Matching at the drain:
//     u, v continuous,
//     u'(0+) - u'(0-) + 2 i gamma u(0) =  2 eta,
//     v'(0+) - v'(0-) - 2 i gamma v(0) = -2 eta~.
// Propagating modes carry unit Bogoliubov norm |U|^2 - |V|^2 = +-1; the
// evanescent mode is normalized the same way (|  |U|^2 - |V|^2 | = 1, its
// norm is negative), which keeps the localized amplitudes comparable across
// frequencies.
#pragma once

#include "lbec/lattice.hpp"

#include <array>
#include <vector>

namespace lbec {

enum class Side { left, right };
enum class ModeClass { in, out, evanescent, growing };

struct BdGMode {
  double omega = 0.0;
  cplx k;
  cplx u, v;  // amplitudes U, V
  int norm_sign = 1;
  Side side = Side::left;
  ModeClass cls = ModeClass::in;
  double flow = 0.0;  // local background velocity w
  double group_velocity = 0.0;  // zero for evanescent modes
};

/// Roots of k^4/4 + (c^2 - v^2) k^2 + 2 omega v k - omega^2 = 0 with c^2 = n,
/// from the eigenvalues of the companion matrix.  Sorted by real, then
/// imaginary part.
std::array<cplx, 4> dispersion_roots(double omega, double v_flow, double n = 1.0);

/// One mode per class {in, out, evanescent (decaying away from the drain),
/// growing}, in that order.  At omega = 0 the propagating pair degenerates
/// and the call throws.
std::vector<BdGMode> classify_modes(const std::array<cplx, 4>& roots, double omega,
                                    double v_flow, Side side, double n = 1.0);

enum class Regime { subcritical, supercritical };

struct ScatterMatrix {
  double omega = 0.0;
  double gamma = 0.0;
  double n = 1.0;
  Regime background = Regime::subcritical;
  /// rows {A_out, B_out, A_loc, B_loc}, columns {A_in, B_in, eta, eta~}
  Eigen::Matrix4cd entries;

  cplx reflection() const { return entries(0, 0); }
  cplx transmission() const { return entries(1, 0); }
};

enum Channel { A_in = 0, B_in = 1, eta = 2, eta_tilde = 3 };
enum Output { A_out = 0, B_out = 1, A_loc = 2, B_loc = 3 };

/// Plane-wave matching on the homogeneous subcritical background, v = gamma.
ScatterMatrix build_smatrix_subcritical(double omega, double gamma, double n = 1.0);

struct IntegrationOptions {
  /// Distance from the drain (asymptotic healing lengths) where the far-field
  /// modes are seeded and integrated inwards.
  double x_start = 8.0;
  double rel_tol = 1e-12;
  /// Order of the asymptotic series used to seed the far-field modes on the
  /// soliton background.
  int series_order = 4;
};

/// Numerical integration across the grey-soliton pair, v = c^2/gamma.
ScatterMatrix build_smatrix_supercritical(double omega, double gamma, double n_asym = 1.0,
                                          const IntegrationOptions& opt = {});

/// The same integration route on either background; on the subcritical one it
/// reproduces build_smatrix_subcritical and serves as its cross-check.
ScatterMatrix build_smatrix_numerical(double omega, double gamma, Regime regime, double n = 1.0,
                                      const IntegrationOptions& opt = {});

/// Noise-averaged occupation of the left outgoing mode,
/// gamma (|S_{A_out,eta}|^2 + |S_{A_out,eta~}|^2).
double phonon_flux(const ScatterMatrix& s);

/// Quasiparticle current Im(u* u') + Im(v* v') of the scattering solution
/// driven by one input channel, sampled on both sides of the drain.
struct CurrentProfile {
  std::vector<double> x;
  std::vector<double> current;
};
CurrentProfile scattering_current(double omega, double gamma, Regime regime, Channel input,
                                  int samples_per_side = 200, const IntegrationOptions& opt = {});

/// n points logarithmically spaced from lo to hi inclusive.
std::vector<double> log_frequency_grid(double lo, double hi, int n);

}  // namespace lbec
