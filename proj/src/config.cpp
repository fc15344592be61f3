#include "lbec/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace lbec {

const std::vector<ScenarioInfo>& scenario_catalog() {
  static const std::vector<ScenarioInfo> cat = {
      {ScenarioKind::single_drain, "single_drain",
       "one drain at x = 0: density, phase, velocity, fluctuations and g2 profiles"},
      {ScenarioKind::two_drain, "two_drain",
       "two balanced drains at +-L/2: density series and single realizations"},
      {ScenarioKind::critical_scan, "critical_scan",
       "gamma = 2c0/3: profiles rescaled against the Thomas-Fermi critical state"},
      {ScenarioKind::scattering_scan, "scattering_scan",
       "BdG S-matrix over a logarithmic frequency grid for each gamma"},
      {ScenarioKind::gamma_sweep, "gamma_sweep",
       "steady drain density and flow speed versus gamma"},
  };
  return cat;
}

ScenarioKind scenario_from_name(const std::string& name) {
  for (const auto& s : scenario_catalog())
    if (name == s.name) return s.kind;
  throw ConfigError("unknown scenario '" + name + "'");
}

std::string scenario_name(ScenarioKind k) {
  for (const auto& s : scenario_catalog())
    if (s.kind == k) return s.name;
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// shortest text that parses back to the same double
std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double to_double(const std::string& s) {
  double v = 0;
  const auto t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("not a number: '" + t + "'");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const auto t = trim(s);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("not an integer: '" + t + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ConfigError("not a boolean: '" + t + "'");
}

std::vector<double> to_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, std::string>> names;
  E parse(const std::string& s) const {
    for (const auto& [e, n] : names)
      if (n == trim(s)) return e;
    std::string all;
    for (const auto& [e, n] : names) all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("'" + trim(s) + "' is not one of: " + all);
  }
  std::string str(E e) const {
    for (const auto& [x, n] : names)
      if (x == e) return n;
    return "?";
  }
};

const EnumNames<Scheme> scheme_names{
    {{Scheme::split_step_spectral, "split_step_spectral"}, {Scheme::semi_implicit_fd, "semi_implicit_fd"}}};
const EnumNames<Boundary> boundary_names{
    {{Boundary::periodic, "periodic"}, {Boundary::hard_wall, "hard_wall"}}};
const EnumNames<InitialState> initial_names{{{InitialState::bogoliubov_vacuum, "bogoliubov_vacuum"},
                                             {InitialState::mean_field, "mean_field"},
                                             {InitialState::empty_vacuum, "empty_vacuum"}}};

struct Key {
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

#define LBEC_DOUBLE(field) \
  Key { [](ScenarioConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const ScenarioConfig& c) { return fmt(c.field); } }
#define LBEC_INT(field) \
  Key { [](ScenarioConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_int(v)); }, \
        [](const ScenarioConfig& c) { return std::to_string(c.field); } }
#define LBEC_BOOL(field) \
  Key { [](ScenarioConfig& c, const std::string& v) { c.field = to_bool(v); }, \
        [](const ScenarioConfig& c) { return std::string(c.field ? "true" : "false"); } }
#define LBEC_LIST(field) \
  Key { [](ScenarioConfig& c, const std::string& v) { c.field = to_list(v); }, \
        [](const ScenarioConfig& c) { return list_str(c.field); } }
#define LBEC_ENUM(field, names) \
  Key { [](ScenarioConfig& c, const std::string& v) { c.field = names.parse(v); }, \
        [](const ScenarioConfig& c) { return names.str(c.field); } }

// Ordered registry: section -> (key -> accessor); order of the dump.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>>& registry() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>> reg = {
      {"run",
       {{"scenario", Key{[](ScenarioConfig& c, const std::string& v) { c.scenario = scenario_from_name(trim(v)); },
                         [](const ScenarioConfig& c) { return scenario_name(c.scenario); }}}}},
      {"physics",
       {{"gamma", LBEC_LIST(gamma)},
        {"drain_separation", LBEC_DOUBLE(drain_separation)},
        {"n0_xi", LBEC_DOUBLE(n0_xi)}}},
      {"numerics",
       {{"n_sites", LBEC_INT(n_sites)},
        {"dx", LBEC_DOUBLE(dx)},
        {"dt", LBEC_DOUBLE(dt)},
        {"t_max", LBEC_DOUBLE(t_max)},
        {"snapshots", LBEC_LIST(snapshots)},
        {"scheme", LBEC_ENUM(scheme, scheme_names)},
        {"boundary", LBEC_ENUM(boundary, boundary_names)},
        {"cutoff_k", LBEC_DOUBLE(cutoff_k)},
        {"initial", LBEC_ENUM(initial, initial_names)},
        {"noise", LBEC_BOOL(noise)}}},
      {"ensemble",
       {{"n_traj", LBEC_INT(n_traj)},
        {"seed", Key{[](ScenarioConfig& c, const std::string& v) {
                       const auto t = trim(v);
                       std::uint64_t s = 0;
                       auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), s);
                       if (ec != std::errc() || p != t.data() + t.size())
                         throw ConfigError("not a seed: '" + t + "'");
                       c.seed = s;
                     },
                     [](const ScenarioConfig& c) { return std::to_string(c.seed); }}},
        {"workers", LBEC_INT(workers)},
        {"block_size", LBEC_INT(block_size)},
        {"keep_trajectories", LBEC_INT(keep_trajectories)}}},
      {"observables",
       {{"fluctuations", LBEC_BOOL(fluctuations)},
        {"g2", LBEC_BOOL(g2)},
        {"g2_half_width", LBEC_DOUBLE(g2_half_width)},
        {"flow_window_lo", LBEC_DOUBLE(flow_window_lo)},
        {"flow_window_hi", LBEC_DOUBLE(flow_window_hi)}}},
      {"scattering",
       {{"omega_min", LBEC_DOUBLE(omega_min)},
        {"omega_max", LBEC_DOUBLE(omega_max)},
        {"n_omega", LBEC_INT(n_omega)},
        {"n_asym", LBEC_DOUBLE(n_asym)}}},
      {"output",
       {{"directory", Key{[](ScenarioConfig& c, const std::string& v) { c.directory = trim(v); },
                          [](const ScenarioConfig& c) { return c.directory; }}},
        {"binary", LBEC_BOOL(write_binary)},
        {"csv", LBEC_BOOL(write_csv)}}},
  };
  return reg;
}

const Key* find_key(const std::string& section, const std::string& key) {
  for (const auto& [sec, keys] : registry()) {
    if (sec != section) continue;
    for (const auto& [k, acc] : keys)
      if (k == key) return &acc;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& [sec, keys] : registry())
    if (sec == section) return true;
  return false;
}

// Scenario-dependent defaults, applied before explicit keys.
void apply_scenario_defaults(ScenarioConfig& c) {
  switch (c.scenario) {
    case ScenarioKind::two_drain:
      c.gamma = {0.4};
      c.n0_xi = 1000.0;  // Wigner shot noise at n0 ~ 10 makes 30% dips on its own
      c.n_sites = 2048;
      c.dt = 0.02;
      c.n_traj = 8;
      c.keep_trajectories = 4;
      c.snapshots = {0, 50, 100, 150, 200};
      break;
    case ScenarioKind::critical_scan:
      c.gamma = {2.0 / 3.0};
      c.dx = 0.25;
      c.dt = 0.00625;
      c.n_sites = 4096;
      c.t_max = 500;
      c.snapshots = {100, 200, 300, 400, 500};
      c.initial = InitialState::mean_field;
      c.noise = false;
      c.n_traj = 1;
      break;
    case ScenarioKind::gamma_sweep:
      c.gamma = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
      c.dx = 0.25;
      c.dt = 0.00625;
      c.n_sites = 4096;
      c.t_max = 400;
      c.snapshots = {400};
      c.initial = InitialState::mean_field;
      c.noise = false;
      c.n_traj = 1;
      c.flow_window_hi = 30;
      break;
    case ScenarioKind::scattering_scan:
      c.gamma = {0.1, 0.6, 10.0};
      break;
    case ScenarioKind::single_drain:
      break;
  }
}

}  // namespace

std::vector<DrainSpec> ScenarioConfig::drains() const {
  if (scenario == ScenarioKind::two_drain)
    return {{-0.5 * drain_separation, gamma.front()}, {0.5 * drain_separation, gamma.front()}};
  return {{0.0, gamma.front()}};
}

GridSpec ScenarioConfig::grid() const { return make_grid(n_sites, dx, boundary); }

EngineConfig ScenarioConfig::engine(double g) const {
  EngineConfig e;
  e.dt = dt;
  e.drains = drains();
  for (auto& d : e.drains) d.gamma = g;
  e.noise_enabled = noise;
  e.units.n0 = n0_xi;
  e.scheme = scheme;
  return e;
}

EnsemblePlan ScenarioConfig::plan(double g) const {
  EnsemblePlan p;
  p.grid = grid();
  p.engine = engine(g);
  p.initial = initial;
  p.cutoff_k = cutoff_k;
  p.run.t_end = t_max;
  p.run.schedule = snapshots;
  p.run.norm_every = 0;
  p.n_traj = n_traj;
  p.seed = seed;
  p.workers = workers;
  p.block_size = block_size;
  return p;
}

ScenarioConfig parse_config(const std::string& text) {
  struct Entry {
    std::string section, key, value;
    int line;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  std::set<std::string> seen;
  auto fail = [&](const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (!find_key(section, key)) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "'");
    entries.push_back({section, key, trim(line.substr(eq + 1)), line_no});
  }

  ScenarioConfig cfg;
  for (const auto& e : entries)
    if (e.section == "run" && e.key == "scenario") {
      line_no = e.line;
      try {
        cfg.scenario = scenario_from_name(e.value);
      } catch (const ConfigError& err) {
        fail(err.what());
      }
    }
  apply_scenario_defaults(cfg);
  for (const auto& e : entries) {
    line_no = e.line;
    try {
      find_key(e.section, e.key)->set(cfg, e.value);
    } catch (const ConfigError& err) {
      fail(e.key + ": " + err.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ScenarioConfig& c) {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (c.gamma.empty()) bad("physics.gamma: at least one value required");
  for (double g : c.gamma)
    if (!(g >= 0.0)) bad("physics.gamma: loss rates must be >= 0");
  if (!(c.n0_xi > 0.0)) bad("physics.n0_xi must be positive");
  if (c.scenario == ScenarioKind::scattering_scan) {
    if (!(c.omega_min > 0.0 && c.omega_max > c.omega_min)) bad("scattering: need 0 < omega_min < omega_max");
    if (c.n_omega < 2) bad("scattering.n_omega must be >= 2");
    if (!(c.n_asym > 0.0)) bad("scattering.n_asym must be positive");
    for (double g : c.gamma)
      if (g >= 2.0 / 3.0 && g <= std::sqrt(c.n_asym))
        bad("scattering: gamma in [2c/3, c] has neither a subcritical nor a soliton background");
    return;
  }
  if (c.n_sites < 8 || c.n_sites % 2) bad("numerics.n_sites must be even and >= 8");
  if (!(c.dx > 0.0)) bad("numerics.dx must be positive");
  const GridSpec grid = c.grid();
  const double bound = EngineConfig::max_dt(grid);
  if (!(c.dt > 0.0) || c.dt > bound * (1.0 + 1e-12))
    bad("numerics.dt = " + fmt(c.dt) + " violates the stability bound dt <= 0.1*min(dx^2, 1) = " +
        fmt(bound));
  if (!(c.t_max > 0.0)) bad("numerics.t_max must be positive");
  double extent = 0.0;
  for (const auto& d : c.drains()) {
    try {
      (void)grid.site_of(d.position);
    } catch (const std::invalid_argument&) {
      bad("drain at x = " + fmt(d.position) + " is not on a grid site");
    }
    extent = std::max(extent, std::abs(d.position));
  }
  if (grid.half_length() <= extent + Units::c0 * c.t_max)
    bad("box half-length " + fmt(grid.half_length()) +
        " must exceed drain extent + c0*t_max = " + fmt(extent + c.t_max) + " (causal cone)");
  double prev = -1.0;
  for (double t : c.snapshots) {
    if (t <= prev) bad("numerics.snapshots must be strictly increasing");
    if (t < 0.0 || t > c.t_max * (1 + 1e-12)) bad("numerics.snapshots must lie in [0, t_max]");
    const double steps = t / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps))
      bad("numerics.snapshots: " + fmt(t) + " is not a multiple of dt");
    prev = t;
  }
  if (c.scheme == Scheme::split_step_spectral && c.boundary != Boundary::periodic)
    bad("numerics: the spectral scheme needs periodic boundaries");
  if (c.cutoff_k < 0.0 || c.cutoff_k > std::numbers::pi / c.dx * (1 + 1e-12))
    bad("numerics.cutoff_k must lie in [0, pi/dx]");
  if (c.n_traj < 1) bad("ensemble.n_traj must be >= 1");
  if (c.workers < 1) bad("ensemble.workers must be >= 1");
  if (c.block_size < 1) bad("ensemble.block_size must be >= 1");
  if (c.keep_trajectories < 0 || c.keep_trajectories > c.n_traj)
    bad("ensemble.keep_trajectories must lie in [0, n_traj]");
  if (c.g2 && !(c.g2_half_width > 0.0)) bad("observables.g2_half_width must be positive");
  if (!(c.flow_window_hi > c.flow_window_lo && c.flow_window_lo >= 0.0))
    bad("observables: need 0 <= flow_window_lo < flow_window_hi");
}

std::string dump_config(const ScenarioConfig& cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [sec, keys] : registry()) {
    os << (first ? "" : "\n") << "[" << sec << "]\n";
    first = false;
    for (const auto& [k, acc] : keys) os << k << " = " << acc.get(cfg) << "\n";
  }
  return os.str();
}

std::string config_hash(const ScenarioConfig& cfg) {
  const std::string s = dump_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace lbec
