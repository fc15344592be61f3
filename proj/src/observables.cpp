#include "lbec/observables.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lbec {

namespace {

void check_snapshot(int s, std::size_t n) {
  if (s < 0 || static_cast<std::size_t>(s) >= n)
    throw std::out_of_range("reducer: snapshot index out of range");
}

template <typename R>
const R& same_kind(const Reducer& other) {
  const auto* o = dynamic_cast<const R*>(&other);
  if (!o) throw std::invalid_argument("reducer: cannot merge different reducer kinds");
  return *o;
}

Estimate mean_and_error(const std::vector<long>& count, const Eigen::ArrayXXd& sum,
                        const Eigen::ArrayXXd& sum_sq) {
  Estimate e;
  e.mean.resizeLike(sum);
  e.stderr_.resizeLike(sum);
  for (std::size_t s = 0; s < count.size(); ++s) {
    const double n = static_cast<double>(count[s]);
    if (count[s] < 2) throw std::runtime_error("estimate: need at least two trajectories");
    const Eigen::ArrayXd m = sum.row(s).transpose() / n;
    const Eigen::ArrayXd var =
        ((sum_sq.row(s).transpose() - n * m.square()) / (n - 1.0)).max(0.0);
    e.mean.row(s) = m.transpose();
    e.stderr_.row(s) = (var / n).sqrt().transpose();
  }
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

DensityReducer::DensityReducer(int n_snapshots, const GridSpec& grid)
    : grid_(grid),
      count_(n_snapshots, 0),
      sum_(Eigen::ArrayXXd::Zero(n_snapshots, grid.n_sites)),
      sum_sq_(Eigen::ArrayXXd::Zero(n_snapshots, grid.n_sites)) {}

std::unique_ptr<Reducer> DensityReducer::fresh() const {
  return std::make_unique<DensityReducer>(n_snapshots(), grid_);
}

void DensityReducer::observe(int s, const ComplexField& f) {
  check_snapshot(s, count_.size());
  const Eigen::ArrayXd n = f.values.abs2();
  sum_.row(s) += n.transpose();
  sum_sq_.row(s) += n.square().transpose();
  ++count_[s];
}

void DensityReducer::merge(const Reducer& other) {
  const auto& o = same_kind<DensityReducer>(other);
  for (std::size_t s = 0; s < count_.size(); ++s) count_[s] += o.count_[s];
  sum_ += o.sum_;
  sum_sq_ += o.sum_sq_;
}

Estimate density_profile(const DensityReducer& r) {
  Estimate e = mean_and_error(r.counts(), r.sum(), r.sum_sq());
  e.mean -= 0.5 / r.grid().dx;
  return e;
}

// ---------------------------------------------------------------------------

Eigen::ArrayXd unwrapped_phase(const ComplexField& field, int ref) {
  const int n = field.grid.n_sites;
  if (ref < 0 || ref >= n) throw std::out_of_range("unwrapped_phase: bad reference site");
  Eigen::ArrayXd s(n);
  s[ref] = 0.0;
  // nearest branch: the increment is the argument of psi_{j+1} psi_j^*
  for (int j = ref + 1; j < n; ++j)
    s[j] = s[j - 1] + std::arg(field.values[j] * std::conj(field.values[j - 1]));
  for (int j = ref - 1; j >= 0; --j)
    s[j] = s[j + 1] + std::arg(field.values[j] * std::conj(field.values[j + 1]));
  return s;
}

PhaseReducer::PhaseReducer(int n_snapshots, const GridSpec& grid, double n0, int reference_site)
    : grid_(grid),
      threshold_(1e-3 * n0),
      ref_(reference_site),
      count_(n_snapshots, 0),
      sum_(Eigen::ArrayXXd::Zero(n_snapshots, grid.n_sites)),
      sum_sq_(Eigen::ArrayXXd::Zero(n_snapshots, grid.n_sites)),
      unreliable_(Eigen::ArrayXXi::Zero(n_snapshots, grid.n_sites)) {
  if (ref_ < 0 || ref_ >= grid.n_sites) throw std::out_of_range("PhaseReducer: bad reference site");
}

std::unique_ptr<Reducer> PhaseReducer::fresh() const {
  auto r = std::make_unique<PhaseReducer>(static_cast<int>(count_.size()), grid_, 1.0, ref_);
  r->threshold_ = threshold_;
  return r;
}

void PhaseReducer::observe(int s, const ComplexField& f) {
  check_snapshot(s, count_.size());
  const Eigen::ArrayXd ph = unwrapped_phase(f, ref_);
  sum_.row(s) += ph.transpose();
  sum_sq_.row(s) += ph.square().transpose();
  unreliable_.row(s) += (f.values.abs2() < threshold_).cast<int>().transpose();
  ++count_[s];
}

void PhaseReducer::merge(const Reducer& other) {
  const auto& o = same_kind<PhaseReducer>(other);
  for (std::size_t s = 0; s < count_.size(); ++s) count_[s] += o.count_[s];
  sum_ += o.sum_;
  sum_sq_ += o.sum_sq_;
  unreliable_ += o.unreliable_;
}

Estimate phase_profile(const PhaseReducer& r) {
  return mean_and_error(r.counts(), r.sum(), r.sum_sq());
}

Eigen::ArrayXd flow_velocity(const Eigen::ArrayXd& phase, const GridSpec& grid) {
  const int n = static_cast<int>(phase.size());
  if (n != grid.n_sites) throw std::invalid_argument("flow_velocity: length mismatch");
  Eigen::ArrayXd v(n);
  for (int j = 1; j + 1 < n; ++j) v[j] = (phase[j + 1] - phase[j - 1]) / (2.0 * grid.dx);
  v[0] = (phase[1] - phase[0]) / grid.dx;
  v[n - 1] = (phase[n - 1] - phase[n - 2]) / grid.dx;
  return v;
}

ProfileSeries make_profile_series(const std::vector<double>& times, const DensityReducer& d,
                                  const PhaseReducer& p) {
  ProfileSeries ps;
  ps.times = times;
  ps.grid = d.grid();
  ps.density = density_profile(d);
  ps.phase = phase_profile(p);
  ps.velocity.resizeLike(ps.phase.mean);
  for (Eigen::Index s = 0; s < ps.phase.mean.rows(); ++s)
    ps.velocity.row(s) = flow_velocity(ps.phase.mean.row(s).transpose(), ps.grid).transpose();
  return ps;
}

// ---------------------------------------------------------------------------

FluctuationReducer::FluctuationReducer(std::vector<ComplexField> reference)
    : ref_(std::move(reference)), count_(ref_.size(), 0) {
  if (ref_.empty()) throw std::invalid_argument("FluctuationReducer: empty reference");
  const int n = ref_.front().grid.n_sites;
  const int m = static_cast<int>(ref_.size());
  sum_d_ = Eigen::ArrayXXcd::Zero(m, n);
  sum_d2_ = Eigen::ArrayXXd::Zero(m, n);
  sum_d4_ = Eigen::ArrayXXd::Zero(m, n);
}

std::unique_ptr<Reducer> FluctuationReducer::fresh() const {
  return std::make_unique<FluctuationReducer>(ref_);
}

void FluctuationReducer::observe(int s, const ComplexField& f) {
  check_snapshot(s, count_.size());
  if (!(f.grid == ref_[s].grid)) throw std::invalid_argument("FluctuationReducer: baseline mismatch");
  const Eigen::ArrayXcd d = f.values - ref_[s].values;
  const Eigen::ArrayXd d2 = d.abs2();
  sum_d_.row(s) += d.transpose();
  sum_d2_.row(s) += d2.transpose();
  sum_d4_.row(s) += d2.square().transpose();
  ++count_[s];
}

void FluctuationReducer::merge(const Reducer& other) {
  const auto& o = same_kind<FluctuationReducer>(other);
  for (std::size_t s = 0; s < count_.size(); ++s) count_[s] += o.count_[s];
  sum_d_ += o.sum_d_;
  sum_d2_ += o.sum_d2_;
  sum_d4_ += o.sum_d4_;
}

FluctuationWedge fluctuation_wedge(const FluctuationReducer& r, int baseline) {
  check_snapshot(baseline, r.counts().size());
  const Estimate e = mean_and_error(r.counts(), r.sum_d2(), r.sum_d4());
  FluctuationWedge w;
  w.baseline_snapshot = baseline;
  for (const auto& f : r.reference()) w.times.push_back(f.time);
  const int m = static_cast<int>(r.counts().size());
  Eigen::ArrayXXd fluct(m, e.mean.cols());
  for (int s = 0; s < m; ++s) {
    const double n = static_cast<double>(r.counts()[s]);
    fluct.row(s) = e.mean.row(s) - (r.sum_d().row(s) / n).abs2();
  }
  w.n_out = fluct.rowwise() - fluct.row(baseline);
  w.stderr_ = (e.stderr_.square().rowwise() + e.stderr_.row(baseline).square()).sqrt();
  w.stderr_.row(baseline).setZero();
  return w;
}

// ---------------------------------------------------------------------------

G2Reducer::G2Reducer(int n_snapshots, const GridSpec& grid, int first_site, int n_window)
    : grid_(grid), first_(first_site), n_(n_window), count_(n_snapshots, 0) {
  if (first_ < 0 || n_ < 1 || first_ + n_ > grid.n_sites)
    throw std::out_of_range("G2Reducer: window outside the grid");
  s1_.assign(n_snapshots, Eigen::VectorXd::Zero(n_));
  s2_.assign(n_snapshots, Eigen::MatrixXd::Zero(n_, n_));
}

std::unique_ptr<Reducer> G2Reducer::fresh() const {
  return std::make_unique<G2Reducer>(static_cast<int>(count_.size()), grid_, first_, n_);
}

void G2Reducer::observe(int s, const ComplexField& f) {
  check_snapshot(s, count_.size());
  const Eigen::VectorXd n = f.values.segment(first_, n_).abs2().matrix();
  s1_[s] += n;
  s2_[s].selfadjointView<Eigen::Lower>().rankUpdate(n);
  ++count_[s];
}

void G2Reducer::merge(const Reducer& other) {
  const auto& o = same_kind<G2Reducer>(other);
  if (o.first_ != first_ || o.n_ != n_) throw std::invalid_argument("G2Reducer: window mismatch");
  for (std::size_t s = 0; s < count_.size(); ++s) {
    count_[s] += o.count_[s];
    s1_[s] += o.s1_[s];
    s2_[s].triangularView<Eigen::Lower>() += o.s2_[s];
  }
}

Eigen::VectorXd G2Reducer::mean_density(int s) const {
  check_snapshot(s, count_.size());
  return s1_[s] / static_cast<double>(count_[s]);
}

Eigen::MatrixXd G2Reducer::normal_ordered_covariance(int s) const {
  check_snapshot(s, count_.size());
  const double n = static_cast<double>(count_[s]);
  if (count_[s] < 2) throw std::runtime_error("g2: need at least two trajectories");
  const Eigen::VectorXd m = s1_[s] / n;
  Eigen::MatrixXd c = s2_[s].selfadjointView<Eigen::Lower>();
  c = (c - n * m * m.transpose()) / (n - 1.0);
  // Weyl -> normal order on the diagonal of a lattice mode a_j = psi_j sqrt(dx):
  //   <:dn^2:> = Var_W(|psi|^2) - <|psi|^2>_W / dx + 1/(4 dx^2)
  const double dx = grid_.dx;
  c.diagonal().array() += -m.array() / dx + 0.25 / (dx * dx);
  return c;
}

Eigen::MatrixXd connected_g2(const G2Reducer& r, int snapshot) {
  const Eigen::VectorXd n =
      (r.mean_density(snapshot).array() - 0.5 / r.grid().dx).matrix();  // normal-ordered density
  if ((n.array() <= 0.0).any()) throw std::runtime_error("g2: non-positive mean density in window");
  const Eigen::VectorXd inv = n.cwiseInverse();
  return inv.asDiagonal() * r.normal_ordered_covariance(snapshot) * inv.asDiagonal();
}

CorrelationMap g2_map(const G2Reducer& r, int snapshot, int baseline, std::optional<double> norm) {
  const Eigen::MatrixXd g_t = connected_g2(r, snapshot);
  const Eigen::MatrixXd g_0 = connected_g2(r, baseline);
  CorrelationMap map;
  for (int j = 0; j < r.window(); ++j) map.x.push_back(r.grid().x(r.first_site() + j));
  map.normalization = norm ? *norm : std::abs(g_0.diagonal().mean());
  if (!(map.normalization > 0.0)) throw std::runtime_error("g2_map: zero normalization");
  const Eigen::MatrixXd d = g_t - g_0;
  map.g2 = 0.5 * (d + d.transpose()) / map.normalization;
  map.n_traj = r.counts()[snapshot];
  // Shot noise of an off-diagonal entry ~ sqrt(var_i var_j / N) / (n_i n_j),
  // doubled in variance by the baseline subtraction.
  const double dx = r.grid().dx;
  const Eigen::ArrayXd m0 = r.mean_density(baseline).array();
  const Eigen::ArrayXd n0 = m0 - 0.5 / dx;
  const Eigen::ArrayXd var = g_0.diagonal().array() * n0.square() + m0 / dx - 0.25 / (dx * dx);
  map.noise_estimate =
      std::sqrt(2.0 / static_cast<double>(map.n_traj)) * (var / n0.square()).mean() / map.normalization;
  return map;
}

// ---------------------------------------------------------------------------

G2Bands g2_bands(const CorrelationMap& map, double x_min, double x_max, double half_width, double local_lo,
                 double local_hi) {
  double sum[4] = {0, 0, 0, 0};
  long n[4] = {0, 0, 0, 0};
  const auto add = [&](int b, double v) { sum[b] += v, ++n[b]; };
  const auto size = static_cast<Eigen::Index>(map.x.size());
  for (Eigen::Index i = 0; i < size; ++i) {
    const double x = map.x[i];
    if (std::abs(x) <= x_min || std::abs(x) >= x_max) continue;
    for (Eigen::Index j = 0; j < size; ++j) {
      const double y = map.x[j], v = map.g2(i, j);
      if (std::abs(x - y) <= half_width) add(0, v);
      if (std::abs(x + y) <= half_width) add(1, v);
      if (std::abs(y) >= local_lo && std::abs(y) <= local_hi) add((x > 0) == (y > 0) ? 2 : 3, v);
    }
  }
  for (long c : n)
    if (c == 0) throw std::invalid_argument("g2_bands: a band has no samples in the map window");
  return {sum[0] / n[0], sum[1] / n[1], sum[2] / n[2], sum[3] / n[3]};
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("fit_line: need >= 3 points");
  const Eigen::Map<const Eigen::ArrayXd> X(x.data(), x.size()), Y(y.data(), y.size());
  const double n = static_cast<double>(x.size());
  const double mx = X.mean(), my = Y.mean();
  const double sxx = (X - mx).square().sum();
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissa");
  LineFit f;
  f.slope = ((X - mx) * (Y - my)).sum() / sxx;
  f.intercept = my - f.slope * mx;
  const double rss = (Y - f.intercept - f.slope * X).square().sum();
  f.slope_error = std::sqrt(rss / (n - 2.0) / sxx);
  return f;
}

namespace {
struct HingeResult {
  double sse, slope, base;
};
HingeResult hinge_at(const std::vector<double>& ax, const std::vector<double>& y, double k) {
  // y = base + a * max(0, k - |x|): two-parameter linear least squares
  double s0 = 0, s1 = 0, s11 = 0, sy = 0, s1y = 0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const double f = std::max(0.0, k - ax[i]);
    s0 += 1;
    s1 += f;
    s11 += f * f;
    sy += y[i];
    s1y += f * y[i];
  }
  const double det = s0 * s11 - s1 * s1;
  if (std::abs(det) < 1e-300) return {INFINITY, 0.0, 0.0};
  const double a = (s0 * s1y - s1 * sy) / det;
  const double b = (sy - a * s1) / s0;
  double sse = 0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    const double r = y[i] - b - a * std::max(0.0, k - ax[i]);
    sse += r * r;
  }
  return {sse, a, b};
}
}  // namespace

WedgeFit fit_wedge(const std::vector<double>& abs_x, const std::vector<double>& y, double lo,
                   double hi) {
  if (abs_x.size() != y.size() || abs_x.size() < 4 || !(hi > lo))
    throw std::invalid_argument("fit_wedge: bad input");
  const int n_grid = 2000;
  const double step = (hi - lo) / n_grid;
  int best = 0;
  std::vector<double> sse(n_grid + 1);
  for (int i = 0; i <= n_grid; ++i) {
    sse[i] = hinge_at(abs_x, y, lo + i * step).sse;
    if (sse[i] < sse[best]) best = i;
  }
  double k = lo + best * step;
  if (best > 0 && best < n_grid) {
    const double a = sse[best - 1], b = sse[best], c = sse[best + 1];
    const double den = a - 2 * b + c;
    if (den > 0) k += 0.5 * step * (a - c) / den;
  }
  const auto h = hinge_at(abs_x, y, k);
  return {h.slope, k, h.base};
}

double drain_flow_speed(const Eigen::ArrayXd& phase, const GridSpec& grid, double lo, double hi) {
  std::vector<double> xl, yl, xr, yr;
  for (int j = 0; j < grid.n_sites; ++j) {
    const double x = grid.x(j);
    if (std::abs(x) < lo || std::abs(x) > hi) continue;
    (x < 0 ? xl : xr).push_back(x);
    (x < 0 ? yl : yr).push_back(phase[j]);
  }
  // S = -v|x|: slope +v on the left, -v on the right
  return 0.5 * (fit_line(xl, yl).slope - fit_line(xr, yr).slope);
}

std::vector<double> find_density_minima(const Eigen::ArrayXd& density, const GridSpec& grid,
                                        double x_lo, double x_hi, double min_depth,
                                        double half_window) {
  std::vector<double> found;
  const int w = std::max(1, static_cast<int>(std::lround(half_window / grid.dx)));
  for (int j = 1; j + 1 < grid.n_sites; ++j) {
    const double x = grid.x(j);
    if (x <= x_lo || x >= x_hi) continue;
    if (!(density[j] < density[j - 1] && density[j] <= density[j + 1])) continue;
    double background = 0.0;
    for (int i = std::max(0, j - w); i <= std::min(grid.n_sites - 1, j + w); ++i)
      background = std::max(background, density[i]);
    if (background > 0.0 && density[j] < (1.0 - min_depth) * background) found.push_back(x);
  }
  return found;
}

}  // namespace lbec
