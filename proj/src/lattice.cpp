#include "lbec/lattice.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <string>

namespace lbec {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Eigen::ArrayXd GridSpec::positions() const {
  Eigen::ArrayXd x(n_sites);
  for (int j = 0; j < n_sites; ++j) x[j] = this->x(j);
  return x;
}

int GridSpec::site_of(double xpos) const {
  const double s = xpos / dx + origin_index;
  const long j = std::lround(s);
  if (std::abs(s - static_cast<double>(j)) > 1e-9 || j < 0 || j >= n_sites)
    throw std::invalid_argument("position " + std::to_string(xpos) + " is not a grid site");
  return static_cast<int>(j);
}

GridSpec make_grid(int n_sites, double dx, Boundary boundary) {
  if (n_sites < 8) throw std::invalid_argument("make_grid: need at least 8 sites");
  if (n_sites % 2 != 0) throw std::invalid_argument("make_grid: n_sites must be even");
  if (!(dx > 0.0)) throw std::invalid_argument("make_grid: dx must be positive");
  return GridSpec{n_sites, dx, n_sites / 2, boundary};
}

Eigen::ArrayXd momentum_grid(const GridSpec& grid) {
  const int n = grid.n_sites;
  const double dk = 2.0 * std::numbers::pi / (n * grid.dx);
  Eigen::ArrayXd k(n);
  for (int j = 0; j < n; ++j) k[j] = (j < n / 2 ? j : j - n) * dk;
  return k;
}

ComplexField::ComplexField(Eigen::ArrayXcd v, GridSpec g, double t)
    : values(std::move(v)), grid(g), time(t) {
  if (values.size() != grid.n_sites)
    throw std::invalid_argument("ComplexField: value count does not match grid");
}

std::uint64_t ComplexField::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  const std::size_t n = static_cast<std::size_t>(values.size()) * sizeof(cplx);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

Fft::Fft(int n) : n_(n) {
  std::lock_guard lock(planner_mutex());
  auto* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
  const unsigned flags = FFTW_MEASURE | FFTW_UNALIGNED;
  fwd_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, flags);
  bwd_ = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, flags);
  fftw_free(buf);
}

Fft::~Fft() {
  if (!fwd_) return;
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

Fft::Fft(Fft&& o) noexcept : n_(o.n_), fwd_(o.fwd_), bwd_(o.bwd_) {
  o.fwd_ = o.bwd_ = nullptr;
}

Fft& Fft::operator=(Fft&& o) noexcept {
  std::swap(n_, o.n_);
  std::swap(fwd_, o.fwd_);
  std::swap(bwd_, o.bwd_);
  return *this;
}

void Fft::forward(Eigen::ArrayXcd& a) const {
  auto* p = reinterpret_cast<fftw_complex*>(a.data());
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), p, p);
}

void Fft::backward(Eigen::ArrayXcd& a) const {
  auto* p = reinterpret_cast<fftw_complex*>(a.data());
  fftw_execute_dft(static_cast<fftw_plan>(bwd_), p, p);
  a *= 1.0 / n_;
}

}  // namespace lbec
