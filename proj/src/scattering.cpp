#include "lbec/scattering.hpp"

#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lbec {

namespace odeint = boost::numeric::odeint;

std::array<cplx, 4> dispersion_roots(double omega, double v_flow, double n) {
  if (omega < 0.0) throw std::invalid_argument("dispersion_roots: omega must be >= 0");
  if (!(n > 0.0)) throw std::invalid_argument("dispersion_roots: density must be positive");
  // monic form k^4 + c2 k^2 + c1 k + c0
  const double c2 = 4.0 * (n - v_flow * v_flow);
  const double c1 = 8.0 * omega * v_flow;
  const double c0 = -4.0 * omega * omega;
  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  companion(1, 0) = companion(2, 1) = companion(3, 2) = 1.0;
  companion(0, 3) = -c0;
  companion(1, 3) = -c1;
  companion(2, 3) = -c2;
  Eigen::EigenSolver<Eigen::Matrix4d> es(companion, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("dispersion_roots: eigensolver failed");
  std::array<cplx, 4> roots;
  for (int i = 0; i < 4; ++i) roots[i] = es.eigenvalues()[i];
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return roots;
}

std::vector<BdGMode> classify_modes(const std::array<cplx, 4>& roots, double omega,
                                    double v_flow, Side side, double n) {
  if (!(omega > 0.0))
    throw std::invalid_argument("classify_modes: omega = 0 is degenerate; use a small positive omega");
  std::map<ModeClass, BdGMode> found;
  for (cplx k : roots) {
    BdGMode m;
    m.omega = omega;
    m.side = side;
    m.flow = v_flow;
    const bool real = std::abs(k.imag()) <= 1e-9 * (1.0 + std::abs(k));
    if (real) k = k.real();
    const cplx h = 0.5 * k * k + n;
    const cplx big_omega = omega - v_flow * k;
    cplx u = n, v = big_omega - h;
    const double norm = std::norm(u) - std::norm(v);
    const double s = 1.0 / std::sqrt(std::abs(norm));
    m.k = k;
    m.u = u * s;
    m.v = v * s;
    m.norm_sign = norm < 0.0 ? -1 : 1;
    if (real) {
      m.group_velocity = v_flow + (h * k / big_omega).real();
      const bool towards_drain =
          side == Side::left ? m.group_velocity > 0.0 : m.group_velocity < 0.0;
      m.cls = towards_drain ? ModeClass::in : ModeClass::out;
    } else {
      const bool decaying = side == Side::left ? k.imag() < 0.0 : k.imag() > 0.0;
      m.cls = decaying ? ModeClass::evanescent : ModeClass::growing;
    }
    if (!found.emplace(m.cls, m).second) {
      std::ostringstream os;
      os << "classify_modes: ambiguous classification at omega = " << omega
         << ", v = " << v_flow;
      throw std::runtime_error(os.str());
    }
  }
  if (found.size() != 4) throw std::runtime_error("classify_modes: expected one mode per class");
  return {found[ModeClass::in], found[ModeClass::out], found[ModeClass::evanescent],
          found[ModeClass::growing]};
}

namespace {

using State = std::array<cplx, 4>;  // (u, u', v, v')
constexpr cplx I{0.0, 1.0};

struct Background {
  Regime regime;
  double gamma, v, alpha, mu;

  // gauge amplitude; psi0(x) = f(|x|) exp(-i v |x|)
  cplx f(double s) const {
    if (regime == Regime::subcritical) return 1.0;
    return cplx(alpha * std::tanh(alpha * s), v);
  }
  cplx far_phase() const { return f(1e300) / std::abs(f(1e300)); }
  cplx psi0(double x) const { return f(std::abs(x)) * std::exp(-I * v * std::abs(x)); }
};

// Everything below works with c = 1 (unit asymptotic density).
Background make_background(Regime regime, double gamma) {
  Background b{regime, gamma, 0.0, 0.0, 0.0};
  if (regime == Regime::subcritical) {
    if (!(gamma >= 0.0 && gamma < 2.0 / 3.0))
      throw std::invalid_argument("subcritical scattering needs 0 <= gamma < 2c/3");
    b.v = gamma;
    b.mu = 0.5 * b.v * b.v + 1.0;
  } else {
    if (!(gamma > 1.0))
      throw std::invalid_argument("supercritical scattering needs v = c^2/gamma < c, i.e. gamma > c");
    b.v = 1.0 / gamma;
    b.alpha = std::sqrt(1.0 - b.v * b.v);
    b.mu = b.alpha * b.alpha + 1.5 * b.v * b.v;
  }
  return b;
}

double side_sign(Side s) { return s == Side::right ? 1.0 : -1.0; }
double side_flow(const Background& b, Side s) { return -side_sign(s) * b.v; }

// Lab-frame plane-wave state of a far-field mode at position x.
State plane_wave_state(const BdGMode& m, const Background& b, double x) {
  const cplx e = b.far_phase();
  const cplx ku = m.k + m.flow, kv = m.k - m.flow;
  const cplx pu = std::exp(I * ku * x), pv = std::exp(I * kv * x);
  return {e * m.u * pu, e * m.u * I * ku * pu, std::conj(e) * m.v * pv,
          std::conj(e) * m.v * I * kv * pv};
}

// J(a, b) = a_u* b_u' - a_u'* b_u + a_v* b_v' - a_v'* b_v, conserved by the BdG flow.
cplx wronskian(const State& a, const State& b) {
  return std::conj(a[0]) * b[1] - std::conj(a[1]) * b[0] + std::conj(a[2]) * b[3] -
         std::conj(a[3]) * b[2];
}

Eigen::RowVector4cd wronskian_row(const State& a) {
  Eigen::RowVector4cd r;
  r << -std::conj(a[1]), std::conj(a[0]), -std::conj(a[3]), std::conj(a[2]);
  return r;
}

struct BdGRhs {
  const Background* b;
  double omega;
  void operator()(const State& y, State& dy, double x) const {
    const cplx p = b->psi0(x);
    const double n = std::norm(p);
    dy[0] = y[1];
    dy[1] = 2.0 * ((2.0 * n - b->mu - omega) * y[0] + p * p * y[2]);
    dy[2] = y[3];
    dy[3] = 2.0 * ((2.0 * n - b->mu + omega) * y[2] + std::conj(p) * std::conj(p) * y[0]);
  }
};

// Far-field mode on the soliton background seeded from its asymptotic series
//   y~(s) = e^{lambda s} sum_n P_n q^n,  q = exp(-2 alpha s),
// written in the gauge u = e^{-ivs} u~, v = e^{ivs} v~ where the coefficient
// matrix is a polynomial in T = tanh(alpha s) = (1 - q)/(1 + q).
State series_seed(const BdGMode& m, const Background& b, double omega, double X, int order) {
  const double v = b.v, a = b.alpha;
  using M4 = Eigen::Matrix4cd;
  M4 c0 = M4::Zero(), c1 = M4::Zero(), c2 = M4::Zero();
  c0(0, 1) = 1.0;
  c0(2, 3) = 1.0;
  c0(1, 0) = v * v + 2.0 * (2.0 * v * v - b.mu - omega);
  c2(1, 0) = 4.0 * a * a;
  c0(1, 1) = 2.0 * I * v;
  c0(1, 2) = -2.0 * v * v;
  c1(1, 2) = 4.0 * I * v * a;
  c2(1, 2) = 2.0 * a * a;
  c0(3, 2) = v * v + 2.0 * (2.0 * v * v - b.mu + omega);
  c2(3, 2) = 4.0 * a * a;
  c0(3, 3) = -2.0 * I * v;
  c0(3, 0) = -2.0 * v * v;
  c1(3, 0) = -4.0 * I * v * a;
  c2(3, 0) = 2.0 * a * a;

  std::vector<double> t(order + 1), t2(order + 1, 0.0);
  for (int k = 0; k <= order; ++k) t[k] = k == 0 ? 1.0 : 2.0 * (k % 2 ? -1.0 : 1.0);
  for (int i = 0; i <= order; ++i)
    for (int j = 0; i + j <= order; ++j) t2[i + j] += t[i] * t[j];
  std::vector<M4> A(order + 1);
  for (int k = 0; k <= order; ++k) A[k] = (k == 0 ? c0 : M4::Zero()) + t[k] * c1 + t2[k] * c2;

  const double sg = side_sign(m.side);
  const cplx ks = sg * m.k;  // wavenumber in s = |x|
  const cplx lambda = I * ks;
  const cplx e = b.far_phase();
  std::vector<Eigen::Vector4cd> P(order + 1);
  P[0] << e * m.u, e * m.u * lambda, std::conj(e) * m.v, std::conj(e) * m.v * lambda;
  for (int k = 1; k <= order; ++k) {
    Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
    for (int j = 1; j <= k; ++j) rhs += A[j] * P[k - j];
    const M4 lhs = (lambda - 2.0 * a * k) * M4::Identity() - A[0];
    P[k] = lhs.partialPivLu().solve(rhs);
  }
  const double q = std::exp(-2.0 * a * X);
  Eigen::Vector4cd y = Eigen::Vector4cd::Zero(), yp = Eigen::Vector4cd::Zero();
  double qn = 1.0;
  for (int k = 0; k <= order; ++k, qn *= q) {
    y += P[k] * qn;
    yp += (lambda - 2.0 * a * k) * P[k] * qn;
  }
  const cplx grow = std::exp(lambda * X);
  const cplx ut = y[0] * grow, uts = y[1] * grow, vt = y[2] * grow, vts = y[3] * grow;
  const cplx pm = std::exp(-I * v * X), pp = std::exp(I * v * X);
  const cplx uu = pm * ut, du = pm * (uts - I * v * ut);
  const cplx vv = pp * vt, dv = pp * (vts + I * v * vt);
  (void)yp;
  return {uu, sg * du, vv, sg * dv};
}

using RkStepper = odeint::runge_kutta_fehlberg78<State>;

State integrate_inwards(const Background& b, double omega, State y, double x0, double rel_tol,
                        std::vector<double>* xs = nullptr, std::vector<State>* ys = nullptr) {
  BdGRhs rhs{&b, omega};
  auto stepper = odeint::make_controlled<RkStepper>(1e-300, rel_tol);
  const double h0 = x0 > 0 ? -1e-3 : 1e-3;
  if (xs) {
    std::vector<double> times = *xs;
    ys->clear();
    odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(), h0,
                            [&](const State& s, double) { ys->push_back(s); });
    return ys->back();
  }
  odeint::integrate_adaptive(stepper, rhs, y, x0, 0.0, h0);
  return y;
}

struct SideModes {
  std::vector<BdGMode> modes;  // in, out, evanescent, growing
  std::array<State, 4> at_drain;
};

SideModes propagate_side(const Background& b, double omega, Side side, const IntegrationOptions& opt,
                         std::vector<double>* xs = nullptr,
                         std::array<std::vector<State>, 3>* samples = nullptr) {
  SideModes sm;
  const double w = side_flow(b, side);
  sm.modes = classify_modes(dispersion_roots(omega, w), omega, w, side);
  const double X = side_sign(side) * opt.x_start;
  for (int c = 0; c < 4; ++c) {
    const auto& m = sm.modes[c];
    State y0;
    // On the soliton the tanh tail would otherwise seed an evanescent admixture
    // that grows like e^{kappa X} on the way in.
    if (b.regime == Regime::supercritical)
      y0 = series_seed(m, b, omega, opt.x_start, opt.series_order);
    else
      y0 = plane_wave_state(m, b, X);
    if (samples && c < 3)
      sm.at_drain[c] = integrate_inwards(b, omega, y0, X, opt.rel_tol, xs, &(*samples)[c]);
    else
      sm.at_drain[c] = integrate_inwards(b, omega, y0, X, opt.rel_tol);
  }
  return sm;
}

// Solves for the drain values (y_L(0), y_R(0)) of each input channel.
Eigen::Matrix<cplx, 8, 4> solve_drain(const Background& b, const SideModes& L, const SideModes& R) {
  Eigen::Matrix<cplx, 8, 8> A = Eigen::Matrix<cplx, 8, 8>::Zero();
  Eigen::Matrix<cplx, 8, 4> B = Eigen::Matrix<cplx, 8, 4>::Zero();
  A(0, 0) = -1.0;
  A(0, 4) = 1.0;
  A(1, 2) = -1.0;
  A(1, 6) = 1.0;
  A(2, 1) = -1.0;
  A(2, 5) = 1.0;
  A(2, 4) = 2.0 * I * b.gamma;
  B(2, eta) = 2.0;
  A(3, 3) = -1.0;
  A(3, 7) = 1.0;
  A(3, 6) = -2.0 * I * b.gamma;
  B(3, eta_tilde) = -2.0;
  const SideModes* sides[2] = {&L, &R};
  for (int i = 0; i < 2; ++i) {
    const auto& s = *sides[i];
    // no growing component: J(evanescent, y) = 0
    A.block<1, 4>(4 + 2 * i, 4 * i) = wronskian_row(s.at_drain[2]);
    const State& in = s.at_drain[0];
    A.block<1, 4>(5 + 2 * i, 4 * i) = wronskian_row(in) / wronskian(in, in);
    B(5 + 2 * i, i) = 1.0;
  }
  Eigen::PartialPivLU<Eigen::Matrix<cplx, 8, 8>> lu(A);
  return lu.solve(B);
}

// Amplitudes of (in, out, evanescent) in the drain state y of one side.
std::array<cplx, 3> decompose(const SideModes& s, const Eigen::Vector4cd& y) {
  auto J = [&](const State& a) { return (wronskian_row(a) * y)(0, 0); };
  const State &in = s.at_drain[0], &out = s.at_drain[1], &loc = s.at_drain[2];
  const cplx a = J(in) / wronskian(in, in), b = J(out) / wronskian(out, out);
  // The growing mode decays on the way in and is swamped by the evanescent
  // one, so the localized amplitude comes from projecting the remainder.
  cplx num = 0.0, den = 0.0;
  for (int d = 0; d < 4; ++d) {
    num += std::conj(loc[d]) * (y[d] - a * in[d] - b * out[d]);
    den += std::norm(loc[d]);
  }
  return {a, b, num / den};
}

ScatterMatrix rescaled(ScatterMatrix s, double n, double omega_phys, double gamma_phys) {
  const double c = std::sqrt(n);
  s.entries.col(eta) /= c;
  s.entries.col(eta_tilde) /= c;
  s.omega = omega_phys;
  s.gamma = gamma_phys;
  s.n = n;
  return s;
}

void check_inputs(double omega, double n) {
  if (!(omega > 0.0)) throw std::invalid_argument("scattering: omega must be > 0");
  if (!(n > 0.0)) throw std::invalid_argument("scattering: density must be > 0");
}

}  // namespace

ScatterMatrix build_smatrix_subcritical(double omega, double gamma, double n) {
  check_inputs(omega, n);
  const double c = std::sqrt(n);
  const Background b = make_background(Regime::subcritical, gamma / c);
  const double om = omega / n;
  // Plane-wave states at x = 0 for each side.
  std::array<std::vector<BdGMode>, 2> modes;
  for (Side s : {Side::left, Side::right}) {
    const double w = side_flow(b, s);
    modes[s == Side::right] = classify_modes(dispersion_roots(om, w), om, w, s);
  }
  auto column = [&](const BdGMode& m) {
    const State y = plane_wave_state(m, b, 0.0);
    const double sg = side_sign(m.side);
    Eigen::Vector4cd col(sg * y[0], sg * y[2], sg * y[1], sg * y[3]);
    if (m.side == Side::right) {
      col[2] += 2.0 * I * b.gamma * y[0];
      col[3] += -2.0 * I * b.gamma * y[2];
    }
    return col;
  };
  Eigen::Matrix4cd M, N = Eigen::Matrix4cd::Zero();
  M.col(A_out) = column(modes[0][1]);
  M.col(B_out) = column(modes[1][1]);
  M.col(A_loc) = column(modes[0][2]);
  M.col(B_loc) = column(modes[1][2]);
  N.col(A_in) = -column(modes[0][0]);
  N.col(B_in) = -column(modes[1][0]);
  N(2, eta) = 2.0;
  N(3, eta_tilde) = -2.0;
  Eigen::FullPivLU<Eigen::Matrix4cd> lu(M);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << "build_smatrix_subcritical: singular matching system at omega = " << omega
       << ", gamma = " << gamma;
    throw std::runtime_error(os.str());
  }
  ScatterMatrix s;
  s.background = Regime::subcritical;
  s.entries = lu.solve(N);
  return rescaled(s, n, omega, gamma);
}

ScatterMatrix build_smatrix_numerical(double omega, double gamma, Regime regime, double n,
                                      const IntegrationOptions& opt) {
  check_inputs(omega, n);
  const double c = std::sqrt(n);
  const Background b = make_background(regime, gamma / c);
  const double om = omega / n;
  const SideModes L = propagate_side(b, om, Side::left, opt);
  const SideModes R = propagate_side(b, om, Side::right, opt);
  const auto Z = solve_drain(b, L, R);
  ScatterMatrix s;
  s.background = regime;
  for (int ch = 0; ch < 4; ++ch) {
    const auto al = decompose(L, Z.block<4, 1>(0, ch));
    const auto ar = decompose(R, Z.block<4, 1>(4, ch));
    s.entries(A_out, ch) = al[1];
    s.entries(B_out, ch) = ar[1];
    s.entries(A_loc, ch) = al[2];
    s.entries(B_loc, ch) = ar[2];
  }
  if (!s.entries.allFinite()) {
    std::ostringstream os;
    os << "scattering: integration failed at omega = " << omega << ", gamma = " << gamma;
    throw std::runtime_error(os.str());
  }
  return rescaled(s, n, omega, gamma);
}

ScatterMatrix build_smatrix_supercritical(double omega, double gamma, double n_asym,
                                          const IntegrationOptions& opt) {
  return build_smatrix_numerical(omega, gamma, Regime::supercritical, n_asym, opt);
}

double phonon_flux(const ScatterMatrix& s) {
  return s.gamma * (std::norm(s.entries(A_out, eta)) + std::norm(s.entries(A_out, eta_tilde)));
}

CurrentProfile scattering_current(double omega, double gamma, Regime regime, Channel input,
                                  int samples_per_side, const IntegrationOptions& opt) {
  check_inputs(omega, 1.0);
  if (samples_per_side < 2) throw std::invalid_argument("scattering_current: need >= 2 samples");
  const Background b = make_background(regime, gamma);
  CurrentProfile prof;
  std::array<SideModes, 2> sm;
  std::array<std::array<std::vector<State>, 3>, 2> samples;
  std::array<std::vector<double>, 2> xs;
  for (Side s : {Side::left, Side::right}) {
    const int i = s == Side::right;
    const double sg = side_sign(s);
    for (int j = 0; j < samples_per_side; ++j)
      xs[i].push_back(sg * opt.x_start * (1.0 - static_cast<double>(j) / (samples_per_side - 1)));
    sm[i] = propagate_side(b, omega, s, opt, &xs[i], &samples[i]);
  }
  const auto Z = solve_drain(b, sm[0], sm[1]);
  for (int i = 0; i < 2; ++i) {
    const auto amp = decompose(sm[i], Z.block<4, 1>(4 * i, input));
    for (std::size_t j = 0; j < xs[i].size(); ++j) {
      State y{};
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 4; ++d) y[d] += amp[c] * samples[i][c][j][d];
      prof.x.push_back(xs[i][j]);
      prof.current.push_back((std::conj(y[0]) * y[1]).imag() + (std::conj(y[2]) * y[3]).imag());
    }
  }
  return prof;
}

std::vector<double> log_frequency_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw std::invalid_argument("log_frequency_grid: bad range");
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return w;
}

}  // namespace lbec
