#include "lbec/vacuum_sampler.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace lbec {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t s = seed ^ (0x6a09e667f3bcc909ull * (stream_id + 1));
  std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
  return std::mt19937_64(seq);
}

// Modes with |k| <= cutoff, k != 0 unless include_zero.
template <typename Coefficients>
VacuumSample assemble(const GridSpec& grid, double mean_field, double cutoff_k,
                      bool include_zero, RngStream& rng, Coefficients&& coeff) {
  const int n = grid.n_sites;
  const Eigen::ArrayXd k = momentum_grid(grid);
  Eigen::ArrayXcd a = Eigen::ArrayXcd::Zero(n);
  for (int m = 0; m < n; ++m) {
    if (m == 0 && !include_zero) continue;
    if (std::abs(k[m]) > cutoff_k * (1.0 + 1e-12)) continue;
    a[m] = rng.complex_normal(0.5);
  }

  // b_k = u_k a_k - v_k a_{-k}^*, so that delta psi = L^{-1/2} sum_k b_k e^{ikx}.
  Eigen::ArrayXcd b(n);
  for (int m = 0; m < n; ++m) {
    const int mm = (n - m) % n;
    if (m == 0 && !include_zero) {
      b[m] = 0.0;
      continue;
    }
    const auto c = coeff(k[m]);
    b[m] = c.u * a[m] - c.v * std::conj(a[mm]);
    if (m % 2 != 0) b[m] = -b[m];  // e^{-ik x_origin} with x_origin = -n dx / 2
  }
  Fft fft(n);
  fft.backward(b);
  b *= n / std::sqrt(grid.length());
  b += mean_field;
  return VacuumSample{ComplexField(std::move(b), grid, 0.0), std::move(a), cutoff_k};
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : engine_(seeded_engine(seed, stream_id)) {}

cplx RngStream::complex_normal(double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = gauss_(engine_);
  const double im = gauss_(engine_);
  return {s * re, s * im};
}

BogoliubovCoefficients bogoliubov_uv(double k, double g_n) {
  if (k == 0.0) throw std::invalid_argument("bogoliubov_uv: k = 0 has no quasiparticle");
  const double h = 0.5 * k * k + g_n;
  Eigen::Matrix2d block;
  block << h, g_n, -g_n, -h;
  Eigen::EigenSolver<Eigen::Matrix2d> es(block);
  const auto vals = es.eigenvalues();
  const int ip = vals[0].real() > vals[1].real() ? 0 : 1;
  Eigen::Vector2cd vec = es.eigenvectors().col(ip);
  // Positive eigenvalue of a real symplectic block has a real eigenvector.
  double u = vec[0].real(), v = vec[1].real();
  const double norm = u * u - v * v;
  const double s = (u < 0 ? -1.0 : 1.0) / std::sqrt(norm);
  u *= s;
  v *= s;
  return {u, -v, vals[ip].real()};
}

VacuumSample sample_vacuum(const GridSpec& grid, const Units& units, double cutoff_k,
                           RngStream& rng) {
  const double nyquist = std::numbers::pi / grid.dx;
  if (cutoff_k > nyquist * (1.0 + 1e-12))
    throw std::invalid_argument("sample_vacuum: cutoff above the lattice Nyquist wavenumber");
  return assemble(grid, std::sqrt(units.n0), cutoff_k, false, rng,
                  [](double k) { return bogoliubov_uv(k, Units::g_times_n0); });
}

VacuumSample sample_empty_vacuum(const GridSpec& grid, RngStream& rng) {
  return assemble(grid, 0.0, std::numbers::pi / grid.dx, true, rng,
                  [](double) { return BogoliubovCoefficients{1.0, 0.0, 0.0}; });
}

double vacuum_density_excess(const GridSpec& grid, const Units&, double cutoff_k) {
  const Eigen::ArrayXd k = momentum_grid(grid);
  double sum = 0.0;
  for (int m = 1; m < grid.n_sites; ++m) {
    if (std::abs(k[m]) > cutoff_k * (1.0 + 1e-12)) continue;
    const auto c = bogoliubov_uv(k[m], Units::g_times_n0);
    sum += 0.5 * (c.u * c.u + c.v * c.v);
  }
  return sum / grid.length();
}

}  // namespace lbec
