#include "lbec/config.hpp"
#include "lbec/persist.hpp"
#include "lbec/scenarios.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

void apply_overrides(lbec::ScenarioConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::optional<int>& workers, const std::optional<std::string>& out_dir) {
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out_dir) cfg.directory = *out_dir;
  lbec::validate_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lossy 1D condensate simulator: stochastic GPE ensembles, BdG scattering, analytics"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Run the scenario described by a config file");
  auto* validate = app.add_subcommand("validate", "Parse and validate a config; print the resolved form");
  auto* list = app.add_subcommand("list-scenarios", "List the available scenarios");
  for (auto* sub : {run, validate}) {
    sub->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override ensemble.seed");
    sub->add_option("--workers", workers, "Override ensemble.workers")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "Override output.directory");
  }

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& s : lbec::scenario_catalog()) std::cout << s.name << "\t" << s.summary << "\n";
    return 0;
  }

  lbec::ScenarioConfig cfg;
  try {
    cfg = lbec::load_config(config_path);
    apply_overrides(cfg, seed, workers, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  if (validate->parsed()) {
    std::cout << "# config_hash=" << lbec::config_hash(cfg) << "\n" << lbec::dump_config(cfg);
    return 0;
  }

  try {
    const auto m = lbec::run_scenario(cfg, &std::cerr);
    std::cout << lbec::manifest_json(m);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n"
              << "failure record: " << (std::filesystem::path(cfg.directory) / "failure.json").string() << "\n";
    return 1;
  }
}
