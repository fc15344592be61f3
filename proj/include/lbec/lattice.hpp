// Uniform 1-D grid, unit system and FFT plumbing shared by every module.
//
// Units are fixed to hbar = m = g*n0 = 1, so the bare sound speed c0, the
// healing length xi and the chemical potential mu0 are all 1.  The dilution
// n0*xi is the only free parameter; it sets the interaction g = 1/n0 and
// therefore the relative size of quantum fluctuations.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>

namespace lbec {

using cplx = std::complex<double>;

struct Units {
  static constexpr double hbar = 1.0;
  static constexpr double mass = 1.0;
  static constexpr double g_times_n0 = 1.0;
  static constexpr double c0 = 1.0;
  static constexpr double xi = 1.0;
  static constexpr double mu0 = 1.0;

  double n0 = 10.0;  // atoms per healing length

  double g() const { return g_times_n0 / n0; }
};

enum class Boundary { periodic, hard_wall };

struct GridSpec {
  int n_sites = 0;
  double dx = 0.0;
  int origin_index = 0;
  Boundary boundary = Boundary::periodic;

  double x(int j) const { return (j - origin_index) * dx; }
  double length() const { return n_sites * dx; }
  double half_length() const { return 0.5 * length(); }
  Eigen::ArrayXd positions() const;

  /// Index of the site at position `x`; throws if `x` is not on a site.
  int site_of(double x) const;

  bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int n_sites, double dx, Boundary boundary = Boundary::periodic);

/// Wavenumbers in FFT order: 0, dk, ..., (n/2-1)dk, -n/2 dk, ..., -dk.
/// The Nyquist entry carries -pi/dx.
Eigen::ArrayXd momentum_grid(const GridSpec& grid);

/// Riemann sum  sum_j f_j dx.
template <typename Derived>
double spatial_integral(const Eigen::ArrayBase<Derived>& f, const GridSpec& grid) {
  if (f.size() != grid.n_sites)
    throw std::invalid_argument("spatial_integral: sample count does not match grid");
  return f.sum() * grid.dx;
}

struct ComplexField {
  Eigen::ArrayXcd values;
  GridSpec grid;
  double time = 0.0;

  ComplexField() = default;
  ComplexField(Eigen::ArrayXcd v, GridSpec g, double t = 0.0);

  /// Weyl norm  sum |psi_j|^2 dx.
  double weyl_norm() const { return values.abs2().sum() * grid.dx; }
  /// FNV-1a over the raw bytes; used to compare runs bit for bit.
  std::uint64_t hash() const;
};

/// In-place complex FFT of a fixed length.  Plans are created under a global
/// lock so instances may be built from any thread; execution is lock free.
class Fft {
 public:
  explicit Fft(int n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&&) noexcept;
  Fft& operator=(Fft&&) noexcept;

  int size() const { return n_; }
  /// Unnormalized forward transform, sum_j a_j exp(-2 pi i jk/n).
  void forward(Eigen::ArrayXcd& a) const;
  /// Inverse transform including the 1/n factor.
  void backward(Eigen::ArrayXcd& a) const;

 private:
  int n_ = 0;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

}  // namespace lbec
