#include "lbec/analytics.hpp"
#include "lbec/scenarios.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace lbec;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lbec_scenario_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("locate_cusp refines a sampled peak") {
  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(0.5 + 0.05 * i);
    y.push_back(1.0 - (x.back() - 0.663) * (x.back() - 0.663));
  }
  CHECK(locate_cusp(x, y) == doctest::Approx(0.663).epsilon(1e-9));
  y = {1, 2, 3};
  CHECK(locate_cusp({0.1, 0.2, 0.3}, y) == 0.3);
  CHECK_THROWS(locate_cusp({0.1}, {}));
}

TEST_CASE("critical_collapse of the analytic state is exact") {
  const GridSpec g = make_grid(1024, 0.5);
  const double n0 = 10.0;
  std::vector<double> times{100.0, 200.0};
  std::vector<ComplexField> fields;
  for (double t : times) {
    const auto cp = critical_profile(t);
    Eigen::ArrayXcd v(g.n_sites);
    for (int j = 0; j < g.n_sites; ++j)
      v[j] = std::sqrt(n0 * cp.density(g.x(j))) * std::exp(cplx(0, cp.phase(g.x(j))));
    fields.emplace_back(v, g, t);
  }
  const auto ps = deterministic_profile_series(times, fields);
  for (int s = 0; s < 2; ++s) {
    const auto d = critical_collapse(ps, s, n0);
    CHECK(d.t == times[s]);
    CHECK(d.density < 1e-12);
    CHECK(d.phase < 1e-9);
  }
}

TEST_CASE("SnapshotCollector keeps the first trajectories in order") {
  const GridSpec g = make_grid(8, 1.0);
  SnapshotCollector a(2);
  auto b = a.fresh();
  auto field = [&](double val) { return ComplexField(Eigen::ArrayXcd::Constant(8, val), g); };
  a.observe(0, field(1));
  a.end_trajectory();
  b->observe(0, field(2));
  b->end_trajectory();
  b->observe(0, field(3));
  b->end_trajectory();
  a.merge(*b);
  REQUIRE(a.trajectories().size() == 2);
  CHECK(a.trajectories()[0][0].values[0] == cplx(1, 0));
  CHECK(a.trajectories()[1][0].values[0] == cplx(2, 0));
}

TEST_CASE("scattering_scan writes datasets, config and manifest") {
  auto cfg = parse_config(
      "[run]\nscenario = scattering_scan\n[physics]\ngamma = 0.1, 3\n"
      "[scattering]\nn_omega = 5\nomega_min = 0.01\nomega_max = 1\n");
  cfg.directory = fresh_dir("scan").string();
  const auto m = run_scenario(cfg);
  CHECK(m.status == "ok");
  CHECK(m.config_hash == config_hash(cfg));
  const fs::path dir = cfg.directory;
  REQUIRE(fs::exists(dir / "manifest.json"));
  REQUIRE(fs::exists(dir / "smatrix.bin"));
  REQUIRE(fs::exists(dir / "smatrix.csv"));
  CHECK(parse_config(slurp(dir / "config.resolved.ini")) == cfg);
  const auto ds = read_binary(dir / "smatrix.bin");
  CHECK(ds.dtype == DType::complex128);
  CHECK(ds.shape == std::vector<std::uint64_t>{2, 5, 4, 4});
  CHECK(ds.meta.at("config_hash") == m.config_hash);
  const auto csv = read_csv(dir / "smatrix.csv");
  CHECK(csv.rows.size() == 10);
  CHECK(csv.comment.find(m.config_hash) != std::string::npos);
  const auto back = read_manifest(dir / "manifest.json");
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.seed == cfg.seed);
  CHECK_FALSE(back.versions.empty());
  CHECK(back.wall_time_s >= 0.0);
}

TEST_CASE("single_drain ensemble run records fluctuation and g2 summaries") {
  auto cfg = parse_config(
      "[numerics]\nn_sites = 256\nt_max = 20\nsnapshots = 0, 10, 20\ndt = 0.025\n"
      "[physics]\nn0_xi = 100\n"
      "[ensemble]\nn_traj = 8\nblock_size = 2\n"
      "[observables]\nfluctuations = true\ng2 = true\ng2_half_width = 30\n"
      "flow_window_lo = 3\nflow_window_hi = 12\n");
  cfg.directory = fresh_dir("single").string();
  const auto m = run_scenario(cfg);
  const fs::path dir = cfg.directory;
  CHECK(fs::exists(dir / "gamma_0.1_profiles.csv"));
  CHECK(fs::exists(dir / "gamma_0.1_n_out.bin"));
  CHECK(fs::exists(dir / "gamma_0.1_g2_t20.bin"));
  CHECK(m.summary.count("gamma_0.1.flow_speed"));
  CHECK(m.summary.count("gamma_0.1.wedge_slope"));
  CHECK(m.summary.count("gamma_0.1_g2_t20.diagonal"));
  CHECK(std::isfinite(m.summary.at("gamma_0.1_g2_t20.diagonal_err")));
  CHECK(m.summary.at("gamma_0.1_g2_t20.diagonal_err") > 0.0);
  const auto g2 = read_binary(dir / "gamma_0.1_g2_t20.bin");
  CHECK(g2.shape == std::vector<std::uint64_t>{121, 121});

  // same seed, same numbers
  cfg.directory = fresh_dir("single_again").string();
  const auto again = run_scenario(cfg);
  CHECK(again.summary.at("gamma_0.1.flow_speed") == m.summary.at("gamma_0.1.flow_speed"));
}

TEST_CASE("a failing run leaves failure.json and a failed manifest") {
  auto cfg = parse_config("");
  cfg.dt = 1.0;
  cfg.directory = fresh_dir("fail").string();
  CHECK_THROWS_AS(run_scenario(cfg), ConfigError);
  const fs::path dir = cfg.directory;
  REQUIRE(fs::exists(dir / "failure.json"));
  CHECK(slurp(dir / "failure.json").find("stability bound") != std::string::npos);
  CHECK(read_manifest(dir / "manifest.json").status == "failed");
}
