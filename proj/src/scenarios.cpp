#include "lbec/scenarios.hpp"

#include "lbec/analytics.hpp"
#include "lbec/scattering.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

namespace lbec {

SnapshotCollector::SnapshotCollector(int limit) : limit_(limit) {}

std::unique_ptr<Reducer> SnapshotCollector::fresh() const {
  return std::make_unique<SnapshotCollector>(limit_);
}

void SnapshotCollector::observe(int, const ComplexField& field) {
  if (static_cast<int>(done_.size()) < limit_) current_.push_back(field);
}

void SnapshotCollector::end_trajectory() {
  if (static_cast<int>(done_.size()) < limit_) done_.push_back(std::move(current_));
  current_.clear();
}

void SnapshotCollector::merge(const Reducer& other) {
  const auto* o = dynamic_cast<const SnapshotCollector*>(&other);
  if (!o) throw std::invalid_argument("SnapshotCollector::merge: reducer kind mismatch");
  for (const auto& t : o->done_)
    if (static_cast<int>(done_.size()) < limit_) done_.push_back(t);
}

std::vector<ComplexField> mean_field_snapshots(const EnsemblePlan& plan) {
  EngineConfig eng = plan.engine;
  eng.noise_enabled = false;
  const Stepper stepper(plan.grid, eng);
  const ComplexField init(Eigen::ArrayXcd::Constant(plan.grid.n_sites, std::sqrt(eng.units.n0)),
                          plan.grid, 0.0);
  std::vector<ComplexField> out;
  const SnapshotSink keep = [&](int, const ComplexField& f) { out.push_back(f); };
  const auto rec = run_trajectory(init, stepper, plan.run, std::span(&keep, 1), nullptr);
  if (rec.aborted) throw std::runtime_error("mean-field run aborted: " + rec.abort_reason);
  return out;
}

ProfileSeries deterministic_profile_series(const std::vector<double>& times,
                                           const std::vector<ComplexField>& fields) {
  if (fields.empty() || fields.size() != times.size())
    throw std::invalid_argument("deterministic_profile_series: one field per time required");
  ProfileSeries ps;
  ps.times = times;
  ps.grid = fields.front().grid;
  const auto m = static_cast<Eigen::Index>(fields.size());
  const Eigen::Index n = ps.grid.n_sites;
  ps.density.mean.resize(m, n);
  ps.phase.mean.resize(m, n);
  ps.velocity.resize(m, n);
  for (Eigen::Index s = 0; s < m; ++s) {
    ps.density.mean.row(s) = fields[s].values.abs2().transpose();
    const Eigen::ArrayXd phi = unwrapped_phase(fields[s]);
    ps.phase.mean.row(s) = phi.transpose();
    ps.velocity.row(s) = flow_velocity(phi, ps.grid).transpose();
  }
  ps.density.stderr_ = Eigen::ArrayXXd::Zero(m, n);
  ps.phase.stderr_ = Eigen::ArrayXXd::Zero(m, n);
  return ps;
}

namespace {

bool is_deterministic(const EnsemblePlan& plan) {
  return !plan.engine.noise_enabled && plan.initial == InitialState::mean_field;
}

}  // namespace

ProfileSeries run_profiles(const EnsemblePlan& plan, EnsembleStats* stats) {
  if (is_deterministic(plan)) {
    if (stats) *stats = EnsembleStats{1, 0, {}, 0};
    return deterministic_profile_series(plan.run.schedule, mean_field_snapshots(plan));
  }
  const int m = static_cast<int>(plan.run.schedule.size());
  DensityReducer dens(m, plan.grid);
  PhaseReducer phase(m, plan.grid, plan.engine.units.n0);
  Reducer* reducers[] = {&dens, &phase};
  const auto st = run_ensemble(plan, reducers);
  if (stats) *stats = st;
  return make_profile_series(plan.run.schedule, dens, phase);
}

DrainState measure_drain_state(const ProfileSeries& ps, int snapshot, double n0, double lo, double hi) {
  if (snapshot < 0 || snapshot >= ps.density.mean.rows())
    throw std::out_of_range("measure_drain_state: snapshot out of range");
  DrainState d;
  const Eigen::ArrayXd phase = ps.phase.mean.row(snapshot).transpose();
  d.flow_speed = drain_flow_speed(phase, ps.grid, lo, hi);
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j < ps.grid.n_sites; ++j) {
    const double ax = std::abs(ps.grid.x(j));
    if (ax < lo || ax > hi) continue;
    sum += ps.density.mean(snapshot, j);
    ++count;
  }
  d.window_density = count ? sum / count / n0 : 0.0;
  d.drain_density = ps.density.mean(snapshot, ps.grid.site_of(0.0)) / n0;
  return d;
}

double locate_cusp(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("locate_cusp: bad input");
  std::size_t i = 0;
  for (std::size_t j = 1; j < y.size(); ++j)
    if (y[j] > y[i]) i = j;
  if (i == 0 || i + 1 == y.size()) return x[i];
  const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
  const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
  const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
  const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
  if (den == 0.0) return x1;
  const double v = x1 - 0.5 * num / den;
  return std::clamp(v, x0, x2);
}

CollapseDeviation critical_collapse(const ProfileSeries& ps, int snapshot, double n0, double fraction) {
  const double t = ps.times.at(snapshot);
  if (!(t > 0.0)) throw std::invalid_argument("critical_collapse: needs t > 0");
  const CriticalProfile cp = critical_profile(t, 1.0, Units::c0);
  const double far = ps.phase.mean(snapshot, 0);
  const double s_far = cp.phase(ps.grid.x(0));
  double dn = 0, n2 = 0, dp = 0, p2 = 0;
  for (int j = 0; j < ps.grid.n_sites; ++j) {
    const double x = ps.grid.x(j);
    if (std::abs(x) >= fraction * Units::c0 * t) continue;
    const double n_meas = ps.density.mean(snapshot, j) / n0;
    const double n_th = cp.density(x);
    const double p_meas = (ps.phase.mean(snapshot, j) - far) / t;
    const double p_th = (cp.phase(x) - s_far) / t;
    dn += (n_meas - n_th) * (n_meas - n_th);
    n2 += n_th * n_th;
    dp += (p_meas - p_th) * (p_meas - p_th);
    p2 += p_th * p_th;
  }
  return {t, std::sqrt(dn / n2), std::sqrt(dp / p2)};
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kG2Batches = 10;

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gamma_%g", g);
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RunWriter {
 public:
  RunWriter(const ScenarioConfig& cfg, RunManifest& m, std::ostream* log)
      : cfg_(cfg), dir_(cfg.directory), m_(m), log_(log) {}

  void binary(const std::string& file, Dataset ds) {
    if (!cfg_.write_binary) return;
    ds.meta["config_hash"] = m_.config_hash;
    ds.meta["scenario"] = m_.scenario;
    write_binary(dir_ / file, ds);
    m_.outputs.push_back({file, "binary"});
  }

  void csv(const std::string& file, Table t, const std::string& units) {
    if (!cfg_.write_csv) return;
    t.comment = "config_hash=" + m_.config_hash + " scenario=" + m_.scenario + " units: " + units;
    write_csv(dir_ / file, t);
    m_.outputs.push_back({file, "csv"});
  }

  void say(const std::string& s) {
    if (log_) *log_ << s << std::endl;
  }

  const ScenarioConfig& cfg() const { return cfg_; }
  RunManifest& manifest() { return m_; }

 private:
  const ScenarioConfig& cfg_;
  std::filesystem::path dir_;
  RunManifest& m_;
  std::ostream* log_;
};

Dataset snapshot_grid_dataset(const std::string& name, const Eigen::ArrayXXd& a, const ProfileSeries& ps,
                              const std::string& units) {
  Dataset ds;
  ds.name = name;
  ds.units = units;
  ds.shape = {static_cast<std::uint64_t>(a.rows()), static_cast<std::uint64_t>(a.cols())};
  ds.data.resize(a.size());
  Eigen::Map<Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ds.data.data(), a.rows(),
                                                                                     a.cols()) = a;
  ds.meta["axes"] = "time,x";
  ds.meta["times"] = join(ps.times);
  ds.meta["x0"] = format_double(ps.grid.x(0));
  ds.meta["dx"] = format_double(ps.grid.dx);
  return ds;
}

void write_profiles(RunWriter& out, const std::string& tag, const ProfileSeries& ps) {
  out.binary(tag + "_density.bin", snapshot_grid_dataset("density", ps.density.mean, ps, "atoms/xi"));
  out.binary(tag + "_density_err.bin", snapshot_grid_dataset("density_err", ps.density.stderr_, ps, "atoms/xi"));
  out.binary(tag + "_phase.bin", snapshot_grid_dataset("phase", ps.phase.mean, ps, "rad"));
  out.binary(tag + "_velocity.bin", snapshot_grid_dataset("velocity", ps.velocity, ps, "c0"));
  Table t;
  t.columns = {"t", "x", "density", "density_err", "phase", "phase_err", "velocity"};
  for (Eigen::Index s = 0; s < ps.density.mean.rows(); ++s)
    for (int j = 0; j < ps.grid.n_sites; ++j)
      t.add_row({ps.times[s], ps.grid.x(j), ps.density.mean(s, j), ps.density.stderr_(s, j),
                 ps.phase.mean(s, j), ps.phase.stderr_(s, j), ps.velocity(s, j)});
  out.csv(tag + "_profiles.csv", std::move(t), "t[xi/c0] x[xi] density[atoms/xi] phase[rad] velocity[c0]");
}

void write_correlation(RunWriter& out, const std::string& file, const CorrelationMap& map, double t) {
  const auto n = static_cast<Eigen::Index>(map.x.size());
  Dataset ds;
  ds.name = "g2";
  ds.units = "normalized";
  ds.shape = {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(n)};
  ds.data.resize(n * n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ds.data.data(), n, n) = map.g2;
  ds.meta["axes"] = "x,x'";
  ds.meta["x"] = join(map.x);
  ds.meta["t"] = format_double(t);
  ds.meta["normalization"] = format_double(map.normalization);
  ds.meta["n_traj"] = std::to_string(map.n_traj);
  ds.meta["noise_estimate"] = format_double(map.noise_estimate);
  out.binary(file + ".bin", ds);
  Table tab;
  tab.columns.push_back("x");
  for (double x : map.x) tab.columns.push_back(format_double(x));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row{map.x[i]};
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(map.g2(i, j));
    tab.add_row(std::move(row));
  }
  out.csv(file + ".csv", std::move(tab), "x[xi]; entries normalized by |mean diagonal at t=0|");
}

void run_single_drain(RunWriter& out) {
  const auto& cfg = out.cfg();
  auto& man = out.manifest();
  const int m = static_cast<int>(cfg.snapshots.size());
  for (double gamma : cfg.gamma) {
    const std::string tag = gamma_tag(gamma);
    const EnsemblePlan plan = cfg.plan(gamma);
    out.say("single_drain " + tag + ": " + std::to_string(plan.n_traj) + " trajectories");
    EnsembleStats stats;
    ProfileSeries ps;
    std::optional<FluctuationReducer> fluct;
    std::optional<G2Reducer> g2;
    std::vector<std::unique_ptr<Reducer>> g2_batches;
    if (is_deterministic(plan)) {
      ps = run_profiles(plan, &stats);
    } else {
      DensityReducer dens(m, plan.grid);
      PhaseReducer phase(m, plan.grid, plan.engine.units.n0);
      std::vector<Reducer*> reducers{&dens, &phase};
      if (cfg.fluctuations) {
        fluct.emplace(mean_field_snapshots(plan));
        reducers.push_back(&*fluct);
      }
      // g2 band errors come from batch means; the merged sums do not depend
      // on the split.
      int n_batches = 1;
      if (cfg.g2) {
        const int half = static_cast<int>(std::lround(cfg.g2_half_width / cfg.dx));
        const int first = std::max(0, plan.grid.site_of(0.0) - half);
        const int count = std::min(plan.grid.n_sites - first, 2 * half + 1);
        g2.emplace(m, plan.grid, first, count);
        n_batches = std::clamp(plan.n_traj / 4, 1, kG2Batches);
      }
      for (int b = 0; b < n_batches; ++b) {
        EnsemblePlan part = plan;
        const long lo = static_cast<long>(plan.n_traj) * b / n_batches;
        const long hi = static_cast<long>(plan.n_traj) * (b + 1) / n_batches;
        part.first_trajectory = plan.first_trajectory + static_cast<std::uint64_t>(lo);
        part.n_traj = static_cast<int>(hi - lo);
        std::vector<Reducer*> rs = reducers;
        std::unique_ptr<Reducer> g2_part;
        if (g2) {
          g2_part = g2->fresh();
          rs.push_back(g2_part.get());
        }
        const auto st = run_ensemble(part, rs);
        stats.n_completed += st.n_completed;
        stats.n_aborted += st.n_aborted;
        stats.abort_reasons.insert(stats.abort_reasons.end(), st.abort_reasons.begin(), st.abort_reasons.end());
        stats.combined_hash = stats.combined_hash * 1099511628211ull ^ st.combined_hash;
        if (g2) {
          g2->merge(*g2_part);
          g2_batches.push_back(std::move(g2_part));
        }
      }
      ps = make_profile_series(plan.run.schedule, dens, phase);
    }
    man.n_aborted += stats.n_aborted;
    write_profiles(out, tag, ps);
    const auto st = measure_drain_state(ps, m - 1, cfg.n0_xi, cfg.flow_window_lo, cfg.flow_window_hi);
    man.summary[tag + ".flow_speed"] = st.flow_speed;
    man.summary[tag + ".window_density"] = st.window_density;
    man.summary[tag + ".drain_density"] = st.drain_density;

    if (fluct) {
      const FluctuationWedge w = fluctuation_wedge(*fluct, 0);
      Dataset ds = snapshot_grid_dataset("n_out", w.n_out, ps, "atoms/xi");
      out.binary(tag + "_n_out.bin", ds);
      Table t;
      t.columns = {"t", "x", "n_out", "n_out_err", "prediction"};
      const double v = std::clamp(st.flow_speed, 0.0, 0.999);
      for (int s = 0; s < m; ++s)
        for (int j = 0; j < ps.grid.n_sites; ++j)
          t.add_row({w.times[s], ps.grid.x(j), w.n_out(s, j), w.stderr_(s, j),
                     fluctuation_wedge_prediction(v, ps.grid.x(j), w.times[s])});
      out.csv(tag + "_n_out.csv", std::move(t), "t[xi/c0] x[xi] n_out[atoms/xi]");
      const double t_last = w.times.back();
      if (t_last > 0.0) {
        std::vector<double> ax, y;
        for (int j = 0; j < ps.grid.n_sites; ++j) {
          const double a = std::abs(ps.grid.x(j));
          if (a >= 2.0 && a <= 1.3 * t_last) {
            ax.push_back(a);
            y.push_back(w.n_out(m - 1, j));
          }
        }
        const WedgeFit f = fit_wedge(ax, y, 0.5 * t_last, 1.2 * t_last);
        man.summary[tag + ".wedge_slope"] = f.slope;
        man.summary[tag + ".wedge_kink"] = f.kink;
        man.summary[tag + ".wedge_slope_prediction"] = 0.5 * v / (1.0 + v);
      }
    }
    if (g2) {
      for (int s = 1; s < m; ++s) {
        const CorrelationMap map = g2_map(*g2, s, 0);
        char name[64];
        std::snprintf(name, sizeof name, "_g2_t%g", cfg.snapshots[s]);
        write_correlation(out, tag + name, map, cfg.snapshots[s]);
        const double v = std::clamp(st.flow_speed, 0.0, 0.999);
        const double x_max = std::min(0.8 * (1.0 - v) * cfg.snapshots[s], cfg.g2_half_width - 1.0);
        if (x_max > 7.0) {
          const G2Bands b = g2_bands(map, 5.0, x_max);
          std::vector<G2Bands> parts;
          for (const auto& r : g2_batches) {
            try {
              parts.push_back(g2_bands(g2_map(static_cast<const G2Reducer&>(*r), s, 0, map.normalization), 5.0, x_max));
            } catch (const std::invalid_argument&) {  // batch left with too few trajectories
            }
          }
          auto stderr_of = [&](double G2Bands::*field) {
            const auto n = static_cast<double>(parts.size());
            if (n < 2) return std::numeric_limits<double>::quiet_NaN();
            double mean = 0.0, var = 0.0;
            for (const auto& p : parts) mean += p.*field / n;
            for (const auto& p : parts) var += (p.*field - mean) * (p.*field - mean);
            return std::sqrt(var / (n - 1) / n);
          };
          const std::string key = tag + name + ".";
          man.summary[key + "x_max"] = x_max;
          for (auto [label, field] : {std::pair{"diagonal", &G2Bands::diagonal},
                                      std::pair{"anti_diagonal", &G2Bands::anti_diagonal},
                                      std::pair{"local_same", &G2Bands::local_same},
                                      std::pair{"local_opposite", &G2Bands::local_opposite}}) {
            man.summary[key + label] = b.*field;
            man.summary[key + label + "_err"] = stderr_of(field);
          }
        }
      }
    }
  }
}

void run_two_drain(RunWriter& out) {
  const auto& cfg = out.cfg();
  auto& man = out.manifest();
  const int m = static_cast<int>(cfg.snapshots.size());
  const double half = 0.5 * cfg.drain_separation;
  for (double gamma : cfg.gamma) {
    const std::string tag = gamma_tag(gamma);
    const EnsemblePlan plan = cfg.plan(gamma);
    out.say("two_drain " + tag + ": " + std::to_string(plan.n_traj) + " trajectories");
    EnsembleStats stats;
    ProfileSeries ps;
    std::vector<std::vector<ComplexField>> kept;
    if (is_deterministic(plan)) {
      kept.push_back(mean_field_snapshots(plan));
      ps = deterministic_profile_series(plan.run.schedule, kept.front());
      stats.n_completed = 1;
    } else {
      DensityReducer dens(m, plan.grid);
      PhaseReducer phase(m, plan.grid, plan.engine.units.n0);
      SnapshotCollector keep(cfg.keep_trajectories);
      Reducer* reducers[] = {&dens, &phase, &keep};
      stats = run_ensemble(plan, reducers);
      ps = make_profile_series(plan.run.schedule, dens, phase);
      kept = keep.trajectories();
    }
    man.n_aborted += stats.n_aborted;
    write_profiles(out, tag, ps);

    if (!kept.empty()) {
      const auto nk = kept.size();
      Dataset ds;
      ds.name = "trajectory_density";
      ds.units = "atoms/xi";
      ds.shape = {nk, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(plan.grid.n_sites)};
      for (const auto& traj : kept)
        for (const auto& f : traj)
          for (int j = 0; j < plan.grid.n_sites; ++j) ds.data.push_back(std::norm(f.values[j]));
      ds.meta["axes"] = "trajectory,time,x";
      ds.meta["times"] = join(cfg.snapshots);
      ds.meta["x0"] = format_double(plan.grid.x(0));
      ds.meta["dx"] = format_double(plan.grid.dx);
      out.binary(tag + "_trajectories.bin", ds);

      Table t;
      t.columns = {"trajectory", "t", "x", "density", "phase"};
      double solitons = 0.0, flow = 0.0;
      for (std::size_t k = 0; k < nk; ++k)
        for (int s = 0; s < m; ++s) {
          const ComplexField& f = kept[k][s];
          const Eigen::ArrayXd phi = unwrapped_phase(f);
          for (int j = 0; j < plan.grid.n_sites; ++j)
            t.add_row({static_cast<double>(k), cfg.snapshots[s], plan.grid.x(j), std::norm(f.values[j]), phi[j]});
          if (s == m - 1) {
            const Eigen::ArrayXd n = f.values.abs2();
            solitons += static_cast<double>(
                find_density_minima(n, plan.grid, -half + 2.0, half - 2.0, 0.3).size());
            const int a = plan.grid.site_of(-half), b = plan.grid.site_of(half);
            const int lo = a + static_cast<int>(std::lround(5.0 / plan.grid.dx));
            const int hi = b - static_cast<int>(std::lround(5.0 / plan.grid.dx));
            flow += std::abs((phi[hi] - phi[lo]) / (plan.grid.x(hi) - plan.grid.x(lo)));
          }
        }
      out.csv(tag + "_trajectories.csv", std::move(t), "t[xi/c0] x[xi] density[atoms/xi] phase[rad]");
      man.summary[tag + ".mean_soliton_count"] = solitons / static_cast<double>(nk);
      man.summary[tag + ".mean_interdrain_flow"] = flow / static_cast<double>(nk);
    }
  }
}

void run_critical_scan(RunWriter& out) {
  const auto& cfg = out.cfg();
  auto& man = out.manifest();
  for (double gamma : cfg.gamma) {
    const std::string tag = gamma_tag(gamma);
    const EnsemblePlan plan = cfg.plan(gamma);
    out.say("critical_scan " + tag);
    EnsembleStats stats;
    const ProfileSeries ps = run_profiles(plan, &stats);
    man.n_aborted += stats.n_aborted;
    write_profiles(out, tag, ps);
    Table t;
    t.columns = {"t", "x_scaled", "density_scaled", "phase_scaled", "density_analytic", "phase_analytic"};
    for (std::size_t s = 0; s < ps.times.size(); ++s) {
      const double time = ps.times[s];
      if (!(time > 0.0)) continue;
      const CriticalProfile cp = critical_profile(time);
      const double far = ps.phase.mean(s, 0), s_far = cp.phase(ps.grid.x(0));
      for (int j = 0; j < ps.grid.n_sites; ++j) {
        const double x = ps.grid.x(j);
        if (std::abs(x) > 1.5 * time) continue;
        t.add_row({time, x / time, ps.density.mean(s, j) / cfg.n0_xi, (ps.phase.mean(s, j) - far) / time,
                   cp.density(x), (cp.phase(x) - s_far) / time});
      }
      const auto dev = critical_collapse(ps, static_cast<int>(s), cfg.n0_xi);
      char key[64];
      std::snprintf(key, sizeof key, ".collapse_t%g", time);
      man.summary[tag + key + ".density"] = dev.density;
      man.summary[tag + key + ".phase"] = dev.phase;
    }
    out.csv(tag + "_collapse.csv", std::move(t), "x_scaled = x/(c0 t); density in n0; phase in mu0 t");
  }
  // analytic curve for overlays, in scaled variables
  Table a;
  a.columns = {"x_scaled", "density_scaled", "phase_scaled"};
  const CriticalProfile unit = critical_profile(1.0);
  for (int i = -300; i <= 300; ++i) {
    const double s = i / 200.0;
    a.add_row({s, unit.density(s), unit.phase(s) - unit.phase(1.5)});
  }
  out.csv("critical_profile_analytic.csv", std::move(a), "scaled critical profile");
}

void run_gamma_sweep(RunWriter& out) {
  const auto& cfg = out.cfg();
  auto& man = out.manifest();
  const int last = static_cast<int>(cfg.snapshots.size()) - 1;
  Table t;
  t.columns = {"gamma", "flow_speed", "drain_density", "window_density", "analytic_flow_speed"};
  std::vector<double> speeds;
  for (double gamma : cfg.gamma) {
    out.say("gamma_sweep " + gamma_tag(gamma));
    EnsembleStats stats;
    const ProfileSeries ps = run_profiles(cfg.plan(gamma), &stats);
    man.n_aborted += stats.n_aborted;
    const auto st = measure_drain_state(ps, last, cfg.n0_xi, cfg.flow_window_lo, cfg.flow_window_hi);
    speeds.push_back(st.flow_speed);
    // v = gamma below 2/3, v = c^2/gamma on the soliton branch with c from the window density
    const double analytic = gamma < critical_gamma() ? gamma : st.window_density / gamma;
    t.add_row({gamma, st.flow_speed, st.drain_density, st.window_density, analytic});
  }
  out.csv("gamma_sweep.csv", std::move(t), "gamma[mu0 xi] flow_speed[c0] densities[n0]");
  if (cfg.gamma.size() >= 3) man.summary["cusp_gamma"] = locate_cusp(cfg.gamma, speeds);
}

void run_scattering_scan(RunWriter& out) {
  const auto& cfg = out.cfg();
  auto& man = out.manifest();
  const auto omegas = log_frequency_grid(cfg.omega_min, cfg.omega_max, cfg.n_omega);
  Table t;
  t.columns = {"gamma", "regime", "omega", "re_r", "im_r", "re_t", "im_t", "p_out", "omega_p_out",
               "loc_in_intensity", "loc_eta_intensity", "out_eta_intensity"};
  Dataset ds;
  ds.name = "smatrix";
  ds.dtype = DType::complex128;
  ds.units = "dimensionless";
  ds.shape = {cfg.gamma.size(), omegas.size(), 4, 4};
  ds.meta["axes"] = "gamma,omega,output{A_out,B_out,A_loc,B_loc},input{A_in,B_in,eta,eta~}";
  ds.meta["gamma"] = join(cfg.gamma);
  ds.meta["omega"] = join(omegas);
  for (double gamma : cfg.gamma) {
    const bool sub = gamma < critical_gamma(std::sqrt(cfg.n_asym));
    out.say("scattering_scan " + gamma_tag(gamma) + (sub ? " (subcritical)" : " (supercritical)"));
    for (double w : omegas) {
      const ScatterMatrix s = sub ? build_smatrix_subcritical(w, gamma, cfg.n_asym)
                                  : build_smatrix_supercritical(w, gamma, cfg.n_asym);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          ds.data.push_back(s.entries(i, j).real());
          ds.data.push_back(s.entries(i, j).imag());
        }
      const double p = phonon_flux(s);
      const auto& e = s.entries;
      t.add_row({gamma, sub ? 0.0 : 1.0, w, s.reflection().real(), s.reflection().imag(),
                 s.transmission().real(), s.transmission().imag(), p, w * p,
                 std::norm(e(A_loc, A_in)) + std::norm(e(B_loc, A_in)),
                 std::norm(e(A_loc, eta)) + std::norm(e(A_loc, eta_tilde)),
                 std::norm(e(A_out, eta)) + std::norm(e(A_out, eta_tilde))});
    }
    const ScatterMatrix lo = sub ? build_smatrix_subcritical(omegas.front(), gamma, cfg.n_asym)
                                 : build_smatrix_supercritical(omegas.front(), gamma, cfg.n_asym);
    man.summary[gamma_tag(gamma) + ".reflection_re"] = lo.reflection().real();
    man.summary[gamma_tag(gamma) + ".transmission_re"] = lo.transmission().real();
    man.summary[gamma_tag(gamma) + ".omega_p_out"] = omegas.front() * phonon_flux(lo);
  }
  out.binary("smatrix.bin", ds);
  out.csv("smatrix.csv", std::move(t), "omega[mu] gamma[local units]; regime 0 = subcritical, 1 = supercritical");
}

}  // namespace

RunManifest run_scenario(const ScenarioConfig& cfg, std::ostream* log) {
  RunManifest man;
  man.scenario = scenario_name(cfg.scenario);
  man.config_hash = config_hash(cfg);
  man.seed = cfg.seed;
  man.workers = cfg.workers;
  man.versions = software_versions();
  man.started_utc = utc_now();
  const std::filesystem::path dir = cfg.directory;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  try {
    validate_config(cfg);
    std::filesystem::create_directories(dir);
    {
      std::ofstream f(dir / "config.resolved.ini");
      f << "# config_hash=" << man.config_hash << "\n" << dump_config(cfg);
      if (!f) throw PersistError("cannot write resolved config");
    }
    man.outputs.push_back({"config.resolved.ini", "config"});
    RunWriter out(cfg, man, log);
    switch (cfg.scenario) {
      case ScenarioKind::single_drain: run_single_drain(out); break;
      case ScenarioKind::two_drain: run_two_drain(out); break;
      case ScenarioKind::critical_scan: run_critical_scan(out); break;
      case ScenarioKind::gamma_sweep: run_gamma_sweep(out); break;
      case ScenarioKind::scattering_scan: run_scattering_scan(out); break;
    }
    man.wall_time_s = elapsed();
    write_manifest(dir / "manifest.json", man);
    return man;
  } catch (const std::exception& e) {
    man.status = "failed";
    man.error = e.what();
    man.wall_time_s = elapsed();
    try {
      std::filesystem::create_directories(dir);
      write_manifest(dir / "manifest.json", man);
      std::ofstream f(dir / "failure.json");
      f << manifest_json(man);
    } catch (...) {
    }
    throw;
  }
}

}  // namespace lbec
