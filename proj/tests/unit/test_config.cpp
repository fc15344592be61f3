#include "lbec/config.hpp"

#include <doctest.h>

#include <string>

using namespace lbec;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty config resolves to single_drain defaults") {
  const auto c = parse_config("");
  CHECK(c.scenario == ScenarioKind::single_drain);
  CHECK(c.gamma == std::vector<double>{0.1});
  CHECK(c.n_sites == 4096);
  CHECK(c.dx == 0.5);
  CHECK(c.n0_xi == 10.0);
  REQUIRE(c.drains().size() == 1);
  CHECK(c.drains()[0].position == 0.0);
}

TEST_CASE("scenario defaults apply before explicit keys") {
  const auto c = parse_config("[run]\nscenario = two_drain\n[physics]\ndrain_separation = 40\n");
  CHECK(c.scenario == ScenarioKind::two_drain);
  CHECK(c.gamma == std::vector<double>{0.4});
  const auto d = c.drains();
  REQUIRE(d.size() == 2);
  CHECK(d[0].position == -20.0);
  CHECK(d[1].position == 20.0);

  // order of sections does not matter: the scenario is resolved first
  const auto e = parse_config("[physics]\ngamma = 0.5\n[run]\nscenario = two_drain\n");
  CHECK(e.gamma == std::vector<double>{0.5});
  CHECK(e.drains()[1].position == 30.0);
}

TEST_CASE("lists, booleans and enums parse") {
  const auto c = parse_config(
      "[physics]\ngamma = 0.1, 0.2 ,0.3   # three\n"
      "[observables]\nfluctuations = yes\ng2 = off\n"
      "[numerics]\nboundary = periodic\n");
  CHECK(c.gamma == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(c.fluctuations);
  CHECK_FALSE(c.g2);
}

TEST_CASE("unknown keys and sections are fatal and name the line") {
  CHECK(error_of("[physics]\ngamma = 0.1\nwibble = 3\n").find("config line 3") != std::string::npos);
  CHECK(error_of("[physics]\ngamma = 0.1\nwibble = 3\n").find("wibble") != std::string::npos);
  CHECK(error_of("\n[nonsense]\n").find("config line 2") != std::string::npos);
  CHECK(error_of("gamma = 0.1\n").find("outside") != std::string::npos);
  CHECK(error_of("[physics]\ngamma = 0.1\ngamma = 0.2\n").find("duplicate") != std::string::npos);
  CHECK(error_of("[physics]\ngamma = fast\n").find("config line 2") != std::string::npos);
  CHECK(error_of("[run]\nscenario = nope\n").find("unknown scenario") != std::string::npos);
  CHECK(error_of("[physics\n").find("malformed") != std::string::npos);
}

TEST_CASE("dt above the stability bound is rejected with the bound in the message") {
  const auto msg = error_of("[numerics]\ndx = 0.25\ndt = 0.01\n");
  CHECK(msg.find("stability bound") != std::string::npos);
  CHECK(msg.find("0.00625") != std::string::npos);
  CHECK(error_of("[numerics]\ndx = 0.25\ndt = 0.00625\nsnapshots = 0, 100, 200\n").empty());
}

TEST_CASE("physical and numerical bounds") {
  CHECK(error_of("[numerics]\nn_sites = 512\n").find("causal") != std::string::npos);
  CHECK(error_of("[numerics]\nn_sites = 4095\n").find("even") != std::string::npos);
  CHECK(error_of("[physics]\ngamma = -0.1\n").find(">= 0") != std::string::npos);
  CHECK(error_of("[numerics]\nsnapshots = 0, 100.005\n").find("multiple of dt") != std::string::npos);
  CHECK(error_of("[numerics]\nsnapshots = 100, 50\n").find("increasing") != std::string::npos);
  CHECK(error_of("[numerics]\nscheme = semi_implicit_fd\nboundary = hard_wall\n").empty());
  CHECK_FALSE(error_of("[numerics]\nboundary = hard_wall\n").empty());
  CHECK(error_of("[run]\nscenario = scattering_scan\n[physics]\ngamma = 0.8\n").find("2c/3") !=
        std::string::npos);
  CHECK(error_of("[ensemble]\nn_traj = 0\n").find("n_traj") != std::string::npos);
}

TEST_CASE("resolved dump parses back to the same configuration") {
  for (const auto& s : scenario_catalog()) {
    const auto c = parse_config(std::string("[run]\nscenario = ") + s.name + "\n[ensemble]\nseed = 99\n");
    const auto text = dump_config(c);
    const auto back = parse_config(text);
    CHECK(back == c);
    CHECK(dump_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
  }
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = parse_config("[physics]\ngamma = 0.1\n");
  const auto b = parse_config("[physics]\ngamma = 0.10000000000000001\n");
  const auto c = parse_config("[physics]\ngamma = 0.2\n");
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("scenario catalog") {
  CHECK(scenario_catalog().size() == 5);
  for (const auto& s : scenario_catalog()) CHECK(scenario_from_name(s.name) == s.kind);
  CHECK_THROWS_AS(scenario_from_name("bogus"), ConfigError);
}
