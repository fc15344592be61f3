#include "lbec/analytics.hpp"

#include <cmath>
#include <stdexcept>

namespace lbec {

double StationaryProfile::sound_speed() const { return std::sqrt(n); }

cplx StationaryProfile::psi(double x) const {
  const double s = std::abs(x);
  const cplx flow = std::exp(cplx(0.0, -v * s));
  if (regime != FlowRegime::supercritical) return std::sqrt(n) * flow;
  const double c = sound_speed();
  return std::sqrt(n) * cplx(alpha * std::tanh(alpha * c * s), v / c) * flow;
}

double StationaryProfile::density(double x) const { return std::norm(psi(x)); }

double StationaryProfile::phase(double x) const {
  const double s = std::abs(x);
  if (regime != FlowRegime::supercritical) return -v * s;
  const double c = sound_speed();
  return std::atan2(v / c, alpha * std::tanh(alpha * c * s)) - v * s;
}

double StationaryProfile::velocity(double x) const {
  const double sign = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  if (regime != FlowRegime::supercritical) return -sign * v;
  const double c = sound_speed();
  const double s = std::abs(x);
  const double th = std::tanh(alpha * c * s);
  const double sech2 = 1.0 - th * th;
  const double core = -v * alpha * alpha * sech2 / (alpha * alpha * th * th + v * v / (c * c));
  return sign * (core - v);
}

StationaryProfile subcritical_state(double gamma, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("subcritical_state: density must be positive");
  if (!(gamma >= 0.0) || gamma >= critical_gamma(std::sqrt(n)))
    throw std::invalid_argument("subcritical_state: need 0 <= gamma < 2c/3 for this density");
  StationaryProfile p;
  p.regime = FlowRegime::subcritical;
  p.gamma = gamma;
  p.n = n;
  p.v = gamma;
  p.mu = 0.5 * gamma * gamma + n;
  p.alpha = 1.0;
  return p;
}

StationaryProfile supercritical_state(double gamma, double n_asym) {
  if (!(n_asym > 0.0)) throw std::invalid_argument("supercritical_state: density must be positive");
  const double c2 = n_asym;
  if (!(gamma > 0.0)) throw std::invalid_argument("supercritical_state: gamma must be positive");
  const double v = c2 / gamma;
  if (v >= std::sqrt(c2))
    throw std::invalid_argument("supercritical_state: v = c^2/gamma must stay below c");
  StationaryProfile p;
  p.regime = FlowRegime::supercritical;
  p.gamma = gamma;
  p.n = n_asym;
  p.v = v;
  p.alpha = std::sqrt(1.0 - v * v / c2);
  p.mu = n_asym * p.alpha * p.alpha + 1.5 * v * v;
  return p;
}

double critical_gamma(double c0) {
  if (!(c0 > 0.0)) throw std::invalid_argument("critical_gamma: c0 must be positive");
  return 2.0 * c0 / 3.0;
}

double CriticalProfile::density(double x) const {
  const double s = std::abs(x);
  if (s >= c0 * t) return n0;
  const double a = s / (2.0 * c0 * t) + 1.0;
  return 4.0 * n0 / 9.0 * a * a;
}

double CriticalProfile::phase(double x) const {
  const double s = std::min(std::abs(x), c0 * t);
  const double a = s / (c0 * t) - 1.0;
  return c0 * c0 * t / 3.0 * a * a - c0 * c0 * t;
}

double CriticalProfile::velocity(double x) const {
  const double s = std::abs(x);
  if (s >= c0 * t) return 0.0;
  const double sign = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  return sign * 2.0 * c0 / 3.0 * (s / (c0 * t) - 1.0);
}

CriticalProfile critical_profile(double t, double n0, double c0) {
  if (!(t > 0.0)) throw std::invalid_argument("critical_profile: t must be positive");
  return {t, n0, c0};
}

AcousticMetric acoustic_metric(const std::vector<double>& x, const std::vector<double>& v,
                               const std::vector<double>& c) {
  if (x.size() != v.size() || x.size() != c.size())
    throw std::invalid_argument("acoustic_metric: length mismatch");
  AcousticMetric m;
  m.x = x;
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.g00.push_back(1.0);
    m.g01.push_back(v[i]);
    m.g11.push_back(v[i] * v[i] - c[i] * c[i]);
    d[i] = m.g11.back();
  }
  constexpr double touch = 1e-12;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(d[i]) <= touch) {
      m.horizons.push_back(x[i]);
      continue;
    }
    if (i + 1 < x.size() && std::abs(d[i + 1]) > touch && (d[i] < 0) != (d[i + 1] < 0))
      m.horizons.push_back(x[i] + (x[i + 1] - x[i]) * d[i] / (d[i] - d[i + 1]));
  }
  return m;
}

AcousticMetric acoustic_metric(const StationaryProfile& p, const std::vector<double>& x) {
  std::vector<double> v, c;
  for (double xi : x) {
    v.push_back(p.velocity(xi));
    c.push_back(std::sqrt(p.density(xi)));
  }
  return acoustic_metric(x, v, c);
}

double hawking_temperature(double v, double mu) {
  if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("hawking_temperature: need 0 <= v < 1");
  return v / (1.0 + v) * mu;
}

double fluctuation_wedge_prediction(double v, double x, double t) {
  if (!(v >= 0.0 && v < 1.0))
    throw std::invalid_argument("fluctuation_wedge_prediction: need 0 <= v < 1");
  const double depth = (1.0 - v) * t - std::abs(x);
  return depth > 0.0 ? 0.5 * v / (1.0 + v) * depth : 0.0;
}

}  // namespace lbec
