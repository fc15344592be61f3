#include "lbec/gpe_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace lbec {

void EngineConfig::validate(const GridSpec& grid) const {
  if (!(dt > 0.0)) throw std::invalid_argument("engine: dt must be positive");
  const double bound = max_dt(grid);
  if (dt > bound * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "engine: dt = " << dt << " violates the stability bound dt <= 0.1*min(dx^2, 1) = "
       << bound;
    throw std::invalid_argument(os.str());
  }
  for (const auto& d : drains) {
    if (d.gamma < 0.0) throw std::invalid_argument("engine: drain gamma must be >= 0");
    (void)grid.site_of(d.position);
  }
  if (scheme == Scheme::split_step_spectral && grid.boundary != Boundary::periodic)
    throw std::invalid_argument("engine: the spectral scheme needs a periodic grid");
  if (!(units.n0 > 0.0)) throw std::invalid_argument("engine: n0 must be positive");
}

double EngineConfig::max_dt(const GridSpec& grid) {
  return 0.1 * std::min(grid.dx * grid.dx, 1.0);
}

double noise_increment_variance(double gamma, double dt, double dx) {
  return -std::expm1(-2.0 * gamma * dt / dx) / (2.0 * dx);
}

// ---------------------------------------------------------------------------

namespace {

// Crank-Nicolson propagator for -1/2 d_x^2 over time tau on a three-point
// stencil.  Dirichlet ends for hard walls, cyclic system for periodic grids.
class CrankNicolson {
 public:
  CrankNicolson(const GridSpec& grid, double tau) : n_(grid.n_sites), periodic_(grid.boundary == Boundary::periodic) {
    const double r = tau / (4.0 * grid.dx * grid.dx);
    diag_lhs_ = cplx(1.0, 2.0 * r);
    off_lhs_ = cplx(0.0, -r);
    diag_rhs_ = cplx(1.0, -2.0 * r);
    off_rhs_ = cplx(0.0, r);
    if (periodic_) {
      // Sherman-Morrison: A = B + w w^T-like correction with corner entries.
      gamma_sm_ = -diag_lhs_;
      Eigen::ArrayXcd diag = Eigen::ArrayXcd::Constant(n_, diag_lhs_);
      diag[0] -= gamma_sm_;
      diag[n_ - 1] -= off_lhs_ * off_lhs_ / gamma_sm_;
      factor(diag);
      Eigen::ArrayXcd uvec = Eigen::ArrayXcd::Zero(n_);
      uvec[0] = gamma_sm_;
      uvec[n_ - 1] = off_lhs_;
      z_ = uvec;
      solve_in_place(z_);
    } else {
      factor(Eigen::ArrayXcd::Constant(n_, diag_lhs_));
    }
  }

  void apply(Eigen::ArrayXcd& psi, Eigen::ArrayXcd& rhs) const {
    // rhs = (1 - i tau H / 2) psi
    for (int j = 0; j < n_; ++j) {
      cplx left = j > 0 ? psi[j - 1] : (periodic_ ? psi[n_ - 1] : cplx{});
      cplx right = j < n_ - 1 ? psi[j + 1] : (periodic_ ? psi[0] : cplx{});
      rhs[j] = diag_rhs_ * psi[j] + off_rhs_ * (left + right);
    }
    solve_in_place(rhs);
    if (periodic_) {
      const cplx vy = rhs[0] + off_lhs_ / gamma_sm_ * rhs[n_ - 1];
      const cplx vz = z_[0] + off_lhs_ / gamma_sm_ * z_[n_ - 1];
      const cplx f = vy / (1.0 + vz);
      rhs -= f * z_;
    }
    psi.swap(rhs);
  }

 private:
  void factor(const Eigen::ArrayXcd& diag) {
    cprime_.resize(n_);
    denom_.resize(n_);
    denom_[0] = diag[0];
    cprime_[0] = off_lhs_ / denom_[0];
    for (int j = 1; j < n_; ++j) {
      denom_[j] = diag[j] - off_lhs_ * cprime_[j - 1];
      cprime_[j] = off_lhs_ / denom_[j];
    }
  }
  void solve_in_place(Eigen::ArrayXcd& d) const {
    d[0] /= denom_[0];
    for (int j = 1; j < n_; ++j) d[j] = (d[j] - off_lhs_ * d[j - 1]) / denom_[j];
    for (int j = n_ - 2; j >= 0; --j) d[j] -= cprime_[j] * d[j + 1];
  }

  int n_;
  bool periodic_;
  cplx diag_lhs_, off_lhs_, diag_rhs_, off_rhs_;
  cplx gamma_sm_{};
  Eigen::ArrayXcd cprime_, denom_, z_;
};

bool all_finite(const Eigen::ArrayXcd& a) {
  return a.real().allFinite() && a.imag().allFinite();
}

}  // namespace

struct Stepper::Impl {
  std::vector<int> sites;
  std::vector<double> decay;
  std::vector<double> noise_var;
  double g_dt = 0.0;

  // spectral
  std::unique_ptr<Fft> fft;
  Eigen::ArrayXcd kin_half, kin_full;
  Eigen::ArrayXd k2;
  // finite difference
  std::unique_ptr<CrankNicolson> cn_half;
  mutable Eigen::ArrayXcd scratch;

  void kinetic(Eigen::ArrayXcd& psi, bool full) const {
    if (fft) {
      fft->forward(psi);
      psi *= full ? kin_full : kin_half;
      fft->backward(psi);
    } else {
      cn_half->apply(psi, scratch);
      if (full) cn_half->apply(psi, scratch);
    }
  }

  void local(Eigen::ArrayXcd& psi, RngStream* rng, bool noise) const {
    // exp(-i g |psi|^2 dt) phase rotation
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
      const double theta = g_dt * std::norm(psi[j]);
      psi[j] *= cplx(std::cos(theta), -std::sin(theta));
    }
    for (std::size_t d = 0; d < sites.size(); ++d) {
      psi[sites[d]] *= decay[d];
      if (noise && noise_var[d] > 0.0) psi[sites[d]] += rng->complex_normal(noise_var[d]);
    }
  }
};

Stepper::Stepper(const GridSpec& grid, const EngineConfig& cfg)
    : grid_(grid), cfg_(cfg), impl_(std::make_unique<Impl>()) {
  cfg_.validate(grid_);
  auto& im = *impl_;
  for (const auto& d : cfg_.drains) {
    im.sites.push_back(grid_.site_of(d.position));
    im.decay.push_back(std::exp(-d.gamma * cfg_.dt / grid_.dx));
    im.noise_var.push_back(noise_increment_variance(d.gamma, cfg_.dt, grid_.dx));
  }
  im.g_dt = cfg_.units.g() * cfg_.dt;
  im.scratch.resize(grid_.n_sites);
  if (cfg_.scheme == Scheme::split_step_spectral) {
    im.fft = std::make_unique<Fft>(grid_.n_sites);
    const Eigen::ArrayXd k = momentum_grid(grid_);
    im.k2 = k.square();
    const Eigen::ArrayXd ph = 0.5 * im.k2 * cfg_.dt;
    im.kin_full = (ph.cast<cplx>() * cplx(0.0, -1.0)).exp();
    im.kin_half = (ph.cast<cplx>() * cplx(0.0, -0.5)).exp();
  } else {
    im.cn_half = std::make_unique<CrankNicolson>(grid_, 0.5 * cfg_.dt);
  }
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

std::vector<int> Stepper::drain_sites() const { return impl_->sites; }

void Stepper::step(ComplexField& field, RngStream* rng) const {
  if (!(field.grid == grid_)) throw std::invalid_argument("step: field lives on a different grid");
  const bool noise = cfg_.noise_enabled && rng != nullptr;
  impl_->kinetic(field.values, false);
  impl_->local(field.values, rng, noise);
  impl_->kinetic(field.values, false);
  field.time += cfg_.dt;
  if (!all_finite(field.values)) {
    int site = 0;
    for (; site < field.values.size(); ++site)
      if (!std::isfinite(field.values[site].real()) || !std::isfinite(field.values[site].imag()))
        break;
    throw StepError("non-finite field value", field.time, site);
  }
}

void Stepper::advance(ComplexField& field, int n_steps, RngStream* rng,
                      const std::function<void(const ComplexField&, int)>& after_step) const {
  if (n_steps <= 0) return;
  if (!(field.grid == grid_)) throw std::invalid_argument("advance: field lives on a different grid");
  const bool noise = cfg_.noise_enabled && rng != nullptr;
  const double t0 = field.time;
  const bool fuse = static_cast<bool>(impl_->fft);
  if (fuse) impl_->kinetic(field.values, false);
  for (int s = 0; s < n_steps; ++s) {
    if (!fuse) impl_->kinetic(field.values, false);
    impl_->local(field.values, rng, noise);
    field.time = t0 + (s + 1) * cfg_.dt;
    if (after_step) after_step(field, s);
    if (fuse)
      impl_->kinetic(field.values, s + 1 < n_steps);
    else
      impl_->kinetic(field.values, false);
  }
  field.time = t0 + n_steps * cfg_.dt;
}

double Stepper::energy(const ComplexField& field) const {
  const double dx = grid_.dx;
  double kinetic = 0.0;
  if (impl_->fft) {
    Eigen::ArrayXcd tmp = field.values;
    impl_->fft->forward(tmp);
    kinetic = 0.5 * dx / grid_.n_sites * (impl_->k2 * tmp.abs2()).sum();
  } else {
    const int n = grid_.n_sites;
    const bool periodic = grid_.boundary == Boundary::periodic;
    for (int j = 0; j < n; ++j) {
      cplx next = j + 1 < n ? field.values[j + 1] : (periodic ? field.values[0] : cplx{});
      kinetic += std::norm(next - field.values[j]);
    }
    if (!periodic) kinetic += std::norm(field.values[0]);
    kinetic *= 0.5 / dx;
  }
  const double interaction = 0.5 * cfg_.units.g() * field.values.abs2().square().sum() * dx;
  return kinetic + interaction;
}

ComplexField step(ComplexField field, const EngineConfig& cfg, RngStream& rng) {
  Stepper stepper(field.grid, cfg);
  stepper.step(field, &rng);
  return field;
}

// ---------------------------------------------------------------------------

namespace {

long to_steps(double t, double dt, const char* what) {
  const double s = t / dt;
  const long n = std::lround(s);
  if (std::abs(s - static_cast<double>(n)) > 1e-6 * std::max(1.0, std::abs(s)))
    throw std::invalid_argument(std::string(what) + " is not a multiple of dt");
  return n;
}

}  // namespace

TrajectoryRecord run_trajectory(const ComplexField& init, const Stepper& stepper,
                                const RunPlan& plan, std::span<const SnapshotSink> sinks,
                                RngStream* rng) {
  const double dt = stepper.config().dt;
  const long total = to_steps(plan.t_end, dt, "t_end");
  std::vector<long> snap_steps;
  for (double t : plan.schedule) {
    const long s = to_steps(t, dt, "snapshot time");
    if (!snap_steps.empty() && s <= snap_steps.back())
      throw std::invalid_argument("run_trajectory: schedule must be strictly increasing");
    if (s > total) throw std::invalid_argument("run_trajectory: snapshot after t_end");
    snap_steps.push_back(s);
  }

  TrajectoryRecord rec;
  ComplexField field = init;
  const double n_initial = field.weyl_norm();
  const auto sites = stepper.drain_sites();
  const int drain_site = sites.empty() ? -1 : sites.front();
  const double dx = field.grid.dx;

  auto record = [&](const ComplexField& f) {
    const double nw = f.values.abs2().sum() * dx;
    rec.norm_times.push_back(f.time);
    rec.norms.push_back(nw);
    rec.drain_density.push_back(drain_site >= 0 ? std::norm(f.values[drain_site]) : 0.0);
    if (!std::isfinite(nw)) throw StepError("non-finite field value", f.time, -1);
    if (nw > 10.0 * n_initial && n_initial > 0.0)
      throw StepError("norm exceeded ten times its initial value", f.time, -1);
  };

  std::function<void(const ComplexField&, int)> hook;
  long done = 0;
  if (plan.norm_every > 0) {
    hook = [&](const ComplexField& f, int s) {
      if ((done + s + 1) % plan.norm_every == 0) record(f);
    };
  }

  std::size_t next_snap = 0;
  auto deliver = [&]() {
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == done) {
      for (const auto& sink : sinks) sink(static_cast<int>(next_snap), field);
      ++next_snap;
      rec.snapshots_delivered = static_cast<int>(next_snap);
    }
  };

  try {
    if (!all_finite(field.values)) throw StepError("non-finite field value", field.time, -1);
    if (plan.norm_every > 0) record(field);
    deliver();
    while (done < total) {
      const long target = next_snap < snap_steps.size() ? snap_steps[next_snap] : total;
      const int n = static_cast<int>(target - done);
      stepper.advance(field, n, rng, hook);
      done = target;
      if (!all_finite(field.values)) throw StepError("non-finite field value", field.time, -1);
      deliver();
    }
  } catch (const StepError& e) {
    rec.aborted = true;
    rec.abort_reason = e.what();
    rec.abort_time = e.time;
  }
  rec.final_hash = field.hash();
  rec.final_field = std::move(field);
  return rec;
}

TrajectoryRecord run_trajectory(const VacuumSample& init, const EngineConfig& cfg,
                                const RunPlan& plan, std::span<const SnapshotSink> sinks,
                                RngStream& rng) {
  Stepper stepper(init.field.grid, cfg);
  return run_trajectory(init.field, stepper, plan, sinks, &rng);
}

// ---------------------------------------------------------------------------

ComplexField initial_field(const EnsemblePlan& plan, RngStream& rng) {
  const double cutoff = plan.cutoff_k > 0.0 ? plan.cutoff_k : std::numbers::pi / plan.grid.dx;
  switch (plan.initial) {
    case InitialState::bogoliubov_vacuum:
      return sample_vacuum(plan.grid, plan.engine.units, cutoff, rng).field;
    case InitialState::empty_vacuum:
      return sample_empty_vacuum(plan.grid, rng).field;
    case InitialState::mean_field:
    default:
      return ComplexField(Eigen::ArrayXcd::Constant(plan.grid.n_sites, std::sqrt(plan.engine.units.n0)),
                          plan.grid, 0.0);
  }
}

namespace {

std::uint64_t mix_hash(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

struct BlockResult {
  std::vector<std::unique_ptr<Reducer>> reducers;
  int completed = 0;
  int aborted = 0;
  std::vector<std::string> reasons;
  std::uint64_t hash = 0;
};

}  // namespace

EnsembleStats run_ensemble(const EnsemblePlan& plan, std::span<Reducer* const> reducers) {
  if (plan.n_traj < 1) throw std::invalid_argument("run_ensemble: n_traj must be >= 1");
  if (plan.block_size < 1) throw std::invalid_argument("run_ensemble: block_size must be >= 1");
  plan.engine.validate(plan.grid);

  const int n_blocks = (plan.n_traj + plan.block_size - 1) / plan.block_size;
  const int workers = std::clamp(plan.workers, 1, n_blocks);

  EnsembleStats stats;
  std::mutex merge_mutex;
  std::map<int, BlockResult> pending;
  int next_merge = 0;
  std::atomic<int> next_block{0};
  std::exception_ptr failure;

  auto merge_ready = [&]() {
    // caller holds merge_mutex
    for (auto it = pending.find(next_merge); it != pending.end(); it = pending.find(next_merge)) {
      auto& br = it->second;
      for (std::size_t r = 0; r < reducers.size(); ++r) reducers[r]->merge(*br.reducers[r]);
      stats.n_completed += br.completed;
      stats.n_aborted += br.aborted;
      for (auto& s : br.reasons) stats.abort_reasons.push_back(std::move(s));
      stats.combined_hash = mix_hash(stats.combined_hash, br.hash);
      pending.erase(it);
      ++next_merge;
    }
  };

  auto worker = [&]() {
    try {
      Stepper stepper(plan.grid, plan.engine);
      std::vector<ComplexField> snaps;
      const SnapshotSink keep = [&](int, const ComplexField& f) { snaps.push_back(f); };
      for (int b = next_block++; b < n_blocks; b = next_block++) {
        BlockResult br;
        for (auto* r : reducers) br.reducers.push_back(r->fresh());
        const int lo = b * plan.block_size;
        const int hi = std::min(plan.n_traj, lo + plan.block_size);
        for (int i = lo; i < hi; ++i) {
          RngStream rng(plan.seed, plan.first_trajectory + static_cast<std::uint64_t>(i));
          ComplexField init = initial_field(plan, rng);
          snaps.clear();
          auto rec = run_trajectory(init, stepper, plan.run, std::span(&keep, 1), &rng);
          if (rec.aborted) {
            ++br.aborted;
            br.reasons.push_back("trajectory " + std::to_string(plan.first_trajectory + i) + ": " +
                                 rec.abort_reason);
            continue;
          }
          for (auto& red : br.reducers) {
            for (std::size_t s = 0; s < snaps.size(); ++s) red->observe(static_cast<int>(s), snaps[s]);
            red->end_trajectory();
          }
          ++br.completed;
          br.hash = mix_hash(br.hash, rec.final_hash);
        }
        std::lock_guard lock(merge_mutex);
        pending.emplace(b, std::move(br));
        merge_ready();
      }
    } catch (...) {
      std::lock_guard lock(merge_mutex);
      if (!failure) failure = std::current_exception();
      next_block = n_blocks;
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  if (stats.n_aborted * 100 > plan.n_traj) {
    std::ostringstream os;
    os << "run_ensemble: " << stats.n_aborted << " of " << plan.n_traj
       << " trajectories aborted (more than 1%)";
    if (!stats.abort_reasons.empty()) os << "; first: " << stats.abort_reasons.front();
    throw std::runtime_error(os.str());
  }
  return stats;
}

}  // namespace lbec
