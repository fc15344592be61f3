#include "lbec/scattering.hpp"

#include <doctest.h>

#include <cmath>

using namespace lbec;

namespace {

cplx dispersion_polynomial(cplx k, double omega, double v, double n) {
  return k * k * k * k / 4.0 + (n - v * v) * k * k + 2.0 * omega * v * k - omega * omega;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("dispersion roots satisfy the quartic") {
  for (double omega : {1e-3, 0.1, 1.0, 5.0})
    for (double v : {0.0, 0.3, 0.6})
      for (double n : {1.0, 0.7}) {
        const auto roots = dispersion_roots(omega, v, n);
        for (const cplx k : roots) {
          const double scale = std::max(1.0, std::pow(std::abs(k), 4));
          CHECK(std::abs(dispersion_polynomial(k, omega, v, n)) < 1e-9 * scale);
        }
      }
  CHECK_THROWS(dispersion_roots(-1.0, 0.1));
}

TEST_CASE("classified modes carry unit Bogoliubov norm") {
  for (double omega : {1e-2, 0.5, 2.0})
    for (Side side : {Side::left, Side::right}) {
      const double w = side == Side::left ? 0.4 : -0.4;
      const auto modes = classify_modes(dispersion_roots(omega, w), omega, w, side);
      REQUIRE(modes.size() == 4);
      CHECK(modes[0].cls == ModeClass::in);
      CHECK(modes[1].cls == ModeClass::out);
      CHECK(modes[2].cls == ModeClass::evanescent);
      for (int i = 0; i < 3; ++i) {
        const double norm = std::norm(modes[i].u) - std::norm(modes[i].v);
        CHECK(std::abs(norm) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(norm * modes[i].norm_sign > 0);
      }
      // evanescent decays away from the drain
      const double im = modes[2].k.imag();
      CHECK((side == Side::left ? im < 0 : im > 0));
      // outgoing moves away from the drain
      CHECK((side == Side::left ? modes[1].group_velocity < 0 : modes[1].group_velocity > 0));
    }
  CHECK_THROWS(classify_modes(dispersion_roots(0.0, 0.3), 0.0, 0.3, Side::left));
}

TEST_CASE("low-frequency reflection and transmission") {
  const double v = 0.6;
  const auto s = build_smatrix_subcritical(1e-3, v);
  const double lorentz = 1.0 / std::sqrt(1.0 - v * v);
  CHECK(s.reflection().real() == doctest::Approx(-v * lorentz).epsilon(1e-2));
  CHECK(s.transmission().real() == doctest::Approx(lorentz).epsilon(1e-2));
  CHECK(std::abs(s.reflection().imag()) < 1e-2);
  CHECK(std::abs(s.transmission().imag()) < 1e-2);
}

TEST_CASE("gamma -> 0 is the identity scattering") {
  const auto s = build_smatrix_subcritical(0.3, 1e-9);
  CHECK(std::abs(s.transmission()) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.reflection()) < 1e-6);
  CHECK(std::abs(s.entries(A_loc, A_in)) < 1e-6);
  CHECK(std::abs(s.entries(B_loc, A_in)) < 1e-6);
}

TEST_CASE("noise-driven emission is classical equipartition at low frequency") {
  for (double v : {0.1, 0.6}) {
    for (double omega : log_frequency_grid(1e-3, 1e-2, 5)) {
      const auto s = build_smatrix_subcritical(omega, v);
      CHECK(omega * phonon_flux(s) == doctest::Approx(v / (1 + v)).epsilon(2e-2));
    }
  }
}

TEST_CASE("localized coupling vanishes quadratically below criticality") {
  std::vector<double> w, loc;
  for (double omega : log_frequency_grid(1e-3, 1e-2, 9)) {
    const auto s = build_smatrix_subcritical(omega, 0.1);
    w.push_back(omega);
    loc.push_back(std::norm(s.entries(A_loc, A_in)) + std::norm(s.entries(B_loc, A_in)));
  }
  CHECK(loglog_slope(w, loc) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("numerical integration reproduces plane-wave matching") {
  for (double omega : {0.01, 0.2, 1.0}) {
    const auto a = build_smatrix_subcritical(omega, 0.3);
    const auto b = build_smatrix_numerical(omega, 0.3, Regime::subcritical);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(std::abs(a.entries(i, j) - b.entries(i, j)) < 1e-6 * std::max(1.0, std::abs(a.entries(i, j))));
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(std::abs(a.entries(A_loc, j)) - std::abs(b.entries(A_loc, j))) <
            1e-6 * std::max(1.0, std::abs(a.entries(A_loc, j))));
  }
}

TEST_CASE("quasiparticle current is piecewise constant") {
  const int per_side = 100;
  for (Regime r : {Regime::subcritical, Regime::supercritical}) {
    const double gamma = r == Regime::subcritical ? 0.3 : 3.0;
    for (Channel c : {A_in, eta}) {
      const auto cur = scattering_current(0.2, gamma, r, c, per_side);
      REQUIRE(cur.current.size() == 2 * per_side);
      // samples [0, per_side) are on the left, the rest on the right
      for (int side = 0; side < 2; ++side) {
        const double ref = cur.current[side * per_side];
        CHECK(cur.x[side * per_side] * (side ? 1 : -1) > 0);
        double worst = 0;
        for (int i = 1; i < per_side; ++i)
          worst = std::max(worst, std::abs(cur.current[side * per_side + i] - ref));
        CHECK(worst < 1e-6 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST_CASE("scattering rejects invalid regimes") {
  CHECK_THROWS(build_smatrix_subcritical(0.1, 0.8));
  CHECK_THROWS(build_smatrix_supercritical(0.1, 0.5));
  CHECK_THROWS(build_smatrix_subcritical(0.0, 0.3));
}

TEST_CASE("log frequency grid") {
  const auto g = log_frequency_grid(1e-3, 10.0, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == doctest::Approx(1e-3));
  CHECK(g.back() == doctest::Approx(10.0));
  CHECK(g[2] == doctest::Approx(0.1));
}
