#include "lbec/gpe_engine.hpp"
#include "lbec/observables.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace lbec;

namespace {

ComplexField smooth_state(const GridSpec& g, double n0) {
  Eigen::ArrayXcd v(g.n_sites);
  const double k = 2.0 * std::numbers::pi / g.length();
  for (int j = 0; j < g.n_sites; ++j) {
    const double x = g.x(j);
    v[j] = std::sqrt(n0) * (1.0 + 0.2 * std::cos(k * x)) * std::exp(cplx(0.0, 0.3 * std::sin(2.0 * k * x)));
  }
  return ComplexField(v, g);
}

EngineConfig quiet(double dt, double n0 = 10.0) {
  EngineConfig c;
  c.dt = dt;
  c.noise_enabled = false;
  c.units.n0 = n0;
  return c;
}

}  // namespace

TEST_CASE("stability bound is enforced and named") {
  const GridSpec g = make_grid(64, 0.5);
  CHECK(EngineConfig::max_dt(g) == doctest::Approx(0.025));
  CHECK(EngineConfig::max_dt(make_grid(64, 2.0)) == doctest::Approx(0.1));
  EngineConfig c = quiet(0.03);
  try {
    c.validate(g);
    FAIL("expected the dt bound to be rejected");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("0.1*min(dx^2, 1)") != std::string::npos);
  }
  c.dt = 0.01;
  c.drains = {{0.25, 0.1}};
  CHECK_THROWS(c.validate(g));
}

TEST_CASE("noise variance is the exact Ornstein-Uhlenbeck increment") {
  const double gamma = 0.7, dt = 0.01, dx = 0.5;
  const double a = gamma * dt / dx;
  CHECK(noise_increment_variance(gamma, dt, dx) == doctest::Approx((1.0 - std::exp(-2.0 * a)) / (2.0 * dx)));
  // small-step limit gamma dt / dx^2
  CHECK(noise_increment_variance(gamma, 1e-8, dx) == doctest::Approx(gamma * 1e-8 / (dx * dx)).epsilon(1e-6));
}

TEST_CASE("lossless evolution conserves norm and energy") {
  const GridSpec g = make_grid(128, 0.5);
  const EngineConfig c = quiet(0.0025);
  const Stepper s(g, c);
  ComplexField f = smooth_state(g, 10.0);
  const double n0 = f.weyl_norm(), e0 = s.energy(f);
  s.advance(f, 4000, nullptr);
  CHECK(std::abs(f.weyl_norm() / n0 - 1.0) < 1e-12);
  CHECK(std::abs(s.energy(f) / e0 - 1.0) < 1e-8);
}

TEST_CASE("advance equals repeated single steps") {
  const GridSpec g = make_grid(64, 0.5);
  EngineConfig c;
  c.dt = 0.02;
  c.drains = {{0.0, 0.3}};
  const Stepper s(g, c);
  ComplexField a = smooth_state(g, 10.0), b = a;
  RngStream ra(4, 1), rb(4, 1);
  s.advance(a, 50, &ra);
  for (int i = 0; i < 50; ++i) s.step(b, &rb);
  CHECK((a.values - b.values).abs().maxCoeff() < 1e-10);
  CHECK(a.time == doctest::Approx(b.time));
}

TEST_CASE("finite-difference scheme agrees with the spectral scheme") {
  const GridSpec g = make_grid(256, 0.25);
  EngineConfig c = quiet(0.002);
  c.drains = {{0.0, 0.2}};
  const Stepper spectral(g, c);
  c.scheme = Scheme::semi_implicit_fd;
  const Stepper fd(g, c);
  ComplexField a = smooth_state(g, 10.0), b = a;
  spectral.advance(a, 1000, nullptr);
  fd.advance(b, 1000, nullptr);
  const double rel = (a.values - b.values).abs().maxCoeff() / a.values.abs().maxCoeff();
  CHECK(rel < 0.02);
  CHECK(b.weyl_norm() == doctest::Approx(a.weyl_norm()).epsilon(1e-3));
}

TEST_CASE("deterministic loss obeys dN/dt = -2 gamma |psi(0)|^2") {
  const GridSpec g = make_grid(512, 0.5);
  EngineConfig c = quiet(0.01);
  const double gamma = 0.4;
  c.drains = {{0.0, gamma}};
  const Stepper s(g, c);
  const ComplexField init(Eigen::ArrayXcd::Constant(g.n_sites, std::sqrt(10.0)), g);
  RunPlan plan;
  plan.t_end = 40.0;
  plan.norm_every = 1;
  const auto rec = run_trajectory(init, s, plan, {}, nullptr);
  REQUIRE_FALSE(rec.aborted);
  double lost = 0.0;
  for (std::size_t i = 1; i < rec.drain_density.size(); ++i) lost += 2.0 * gamma * rec.drain_density[i] * c.dt;
  const double dn = rec.norms.front() - rec.norms.back();
  CHECK(dn == doctest::Approx(lost).epsilon(0.01));
}

TEST_CASE("empty-lattice vacuum is a fixed point of loss plus noise") {
  EnsemblePlan p;
  p.grid = make_grid(64, 0.5);
  p.engine.dt = 0.02;
  p.engine.drains = {{0.0, 2.0}};
  p.initial = InitialState::empty_vacuum;
  p.run.t_end = 10.0;
  p.run.schedule = {10.0};
  p.run.norm_every = 0;
  p.n_traj = 400;
  DensityReducer d(1, p.grid);
  Reducer* rs[] = {&d};
  run_ensemble(p, rs);
  const Estimate e = density_profile(d);  // Weyl subtracted: expect 0
  const int j = p.grid.site_of(0.0);
  CHECK(std::abs(e.mean(0, j)) < 3.0 * e.stderr_(0, j));
  CHECK(std::abs(e.mean.row(0).mean()) < 3.0 * e.stderr_.row(0).mean() / std::sqrt(8.0));
}

TEST_CASE("ensemble results do not depend on the worker count") {
  EnsemblePlan p;
  p.grid = make_grid(64, 0.5);
  p.engine.dt = 0.02;
  p.engine.drains = {{0.0, 0.5}};
  p.run.t_end = 2.0;
  p.run.schedule = {0.0, 2.0};
  p.run.norm_every = 0;
  p.n_traj = 21;
  p.block_size = 4;
  auto run = [&](int workers) {
    p.workers = workers;
    auto d = std::make_unique<DensityReducer>(2, p.grid);
    Reducer* rs[] = {d.get()};
    const auto st = run_ensemble(p, rs);
    CHECK(st.n_completed == 21);
    return std::make_pair(st.combined_hash, d->sum());
  };
  const auto [h1, s1] = run(1);
  const auto [h3, s3] = run(3);
  CHECK(h1 == h3);
  CHECK((s1 == s3).all());
}

TEST_CASE("batches with first_trajectory concatenate exactly") {
  EnsemblePlan p;
  p.grid = make_grid(32, 0.5);
  p.engine.dt = 0.02;
  p.engine.drains = {{0.0, 0.5}};
  p.run.t_end = 1.0;
  p.run.schedule = {1.0};
  p.run.norm_every = 0;
  p.block_size = 5;
  p.n_traj = 10;
  DensityReducer all(1, p.grid);
  Reducer* ra[] = {&all};
  run_ensemble(p, ra);
  DensityReducer part(1, p.grid);
  Reducer* rp[] = {&part};
  p.n_traj = 5;
  run_ensemble(p, rp);
  p.first_trajectory = 5;
  run_ensemble(p, rp);
  CHECK((all.sum() - part.sum()).abs().maxCoeff() < 1e-9 * all.sum().abs().maxCoeff());
}

TEST_CASE("a non-finite field aborts the trajectory without throwing") {
  const GridSpec g = make_grid(32, 0.5);
  const Stepper s(g, quiet(0.01));
  ComplexField f(Eigen::ArrayXcd::Ones(32), g);
  f.values[5] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  RunPlan plan;
  plan.t_end = 0.1;
  const auto rec = run_trajectory(f, s, plan, {}, nullptr);
  CHECK(rec.aborted);
  CHECK_FALSE(rec.abort_reason.empty());
}

TEST_CASE("snapshots are delivered at the scheduled times") {
  const GridSpec g = make_grid(32, 0.5);
  const Stepper s(g, quiet(0.01));
  const ComplexField f(Eigen::ArrayXcd::Ones(32), g);
  RunPlan plan;
  plan.t_end = 1.0;
  plan.schedule = {0.0, 0.5, 1.0};
  std::vector<double> times;
  const SnapshotSink sink = [&](int, const ComplexField& x) { times.push_back(x.time); };
  const auto rec = run_trajectory(f, s, plan, std::span(&sink, 1), nullptr);
  REQUIRE(times.size() == 3);
  CHECK(times[1] == doctest::Approx(0.5));
  CHECK(times[2] == doctest::Approx(1.0));
  CHECK(rec.snapshots_delivered == 3);
  plan.schedule = {0.0, 0.505};
  CHECK_THROWS(run_trajectory(f, s, plan, {}, nullptr));
}
