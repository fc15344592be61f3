// Wigner sampling of the homogeneous Bogoliubov ground state.
#pragma once

#include "lbec/lattice.hpp"

#include <cstdint>
#include <random>

namespace lbec {

/// Reproducible random stream.  Streams are addressed by (seed, stream id) so
/// trajectory i of an ensemble always sees the same numbers, whichever worker
/// runs it.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  double normal() { return gauss_(engine_); }
  /// Circular complex Gaussian with <|z|^2> = variance.
  cplx complex_normal(double variance);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

struct BogoliubovCoefficients {
  double u = 1.0;
  double v = 0.0;
  double eps = 0.0;
};

/// Positive-norm coefficients of the homogeneous BdG block at wavenumber k,
/// background interaction energy g*n.  Returned u, v are both >= 0 with
/// u^2 - v^2 = 1; a quasiparticle adds u e^{ikx} a - v e^{-ikx} a* to the field.
BogoliubovCoefficients bogoliubov_uv(double k, double g_n = 1.0);

struct VacuumSample {
  ComplexField field;
  /// a_k in momentum_grid order; zero for modes that were not populated.
  Eigen::ArrayXcd mode_amplitudes;
  double cutoff_k = 0.0;
};

/// psi = sqrt(n0) + L^{-1/2} sum_{0<|k|<=cutoff} (u_k e^{ikx} a_k - v_k e^{-ikx} a_k*)
/// with <a_k* a_q> = delta_kq / 2.  The k = 0 mode is not sampled.
VacuumSample sample_vacuum(const GridSpec& grid, const Units& units, double cutoff_k,
                           RngStream& rng);

/// Field of an empty lattice (no condensate): half a quantum in every mode,
/// including k = 0.  Used to check Weyl corrections.
VacuumSample sample_empty_vacuum(const GridSpec& grid, RngStream& rng);

/// Mode sum L^{-1} sum_{0<|k|<=cutoff} (u_k^2 + v_k^2)/2 that sample_vacuum adds
/// to <|psi|^2> on top of n0.
double vacuum_density_excess(const GridSpec& grid, const Units& units, double cutoff_k);

}  // namespace lbec
