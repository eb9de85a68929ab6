#include "config.hpp"
#include "studies.hpp"

#include "porerom/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace porerom;
  using namespace porerom::cli;

  CLI::App app{"Pore-scale battery model reduction experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "YAML experiment config")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "sets the geometry and test-parameter seeds");

  auto* geometry = app.add_subcommand("geometry", "generate the voxel geometry and its statistics");
  auto* battery = app.add_subcommand("battery-study", "FOM snapshots, POD + EI sweep, error and speedup tables");
  auto* heat = app.add_subcommand("heat-study", "POD-Greedy for global RB and LRBMS on the heat model");
  auto* fom = app.add_subcommand("fom-run", "one full-order battery trajectory");
  auto* rom = app.add_subcommand("rom-eval", "solve one parameter with a saved battery ROM");
  std::optional<double> mu;
  std::string rom_dir;
  fom->add_option("--mu", mu, "applied current density [A/cm^2]");
  rom->add_option("--mu", mu, "applied current density [A/cm^2]")->required();
  rom->add_option("--rom", rom_dir, "directory with basis_c/basis_phi/ei_1c/ei_bv.bin (default OUT/rom)");
  for (auto* sub : {geometry, battery, heat, fom, rom}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (!out_dir.empty()) cfg.output = out_dir;
    if (workers) cfg.workers = *workers;
    if (seed) {
      cfg.geometry.seed = *seed;
      cfg.battery.test_seed = *seed;
    }
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    {
      std::ofstream os(cfg.output / "config_used.yaml");
      os << dump_config(cfg);
    }

    if (geometry->parsed()) {
      geometry_command(cfg, cfg.output);
    } else if (battery->parsed()) {
      battery_study(cfg, cfg.output, &std::cout);
    } else if (heat->parsed()) {
      heat_study(cfg, cfg.output, &std::cout);
    } else if (fom->parsed()) {
      const Trajectory t = fom_run(cfg, cfg.output, mu.value_or(cfg.battery.fom_mu));
      std::cout << "fom-run: " << t.n_states() << " states, " << t.newton_iterations << " Newton iterations, "
                << t.wall_seconds << " s\n";
    } else if (rom->parsed()) {
      rom_eval(cfg, cfg.output, rom_dir.empty() ? cfg.output / "rom" : std::filesystem::path(rom_dir), *mu,
               &std::cout);
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return 0;
}
