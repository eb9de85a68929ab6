#pragma once

#include "porerom/battery_fom.hpp"
#include "porerom/errors.hpp"
#include "porerom/grid.hpp"
#include "porerom/heat.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace porerom::cli {

// Invalid or unreadable configuration; exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct BatteryStudyConfig {
  double mu_min = 0.00012;
  double mu_max = 0.0012;
  double dt = 20.0;
  double t_end = 2000.0;
  int n_train = 20;
  int n_test = 20;
  std::uint64_t test_seed = 11;
  // modes per field and interpolation points per nonlinear part
  std::vector<Index> k_grid{5, 10, 20, 30, 40};
  std::vector<Index> m_grid{50, 100, 200, 300};
  bool sparse_training = true;  // also run the two-endpoint training
  double fom_mu = 0.0012;       // parameter of fom-run
};

struct HeatStudyConfig {
  double mu_min = 0.1;
  double mu_max = 10.0;
  int n_train = 5;
  double target_rel = 1e-8;
  int max_extensions = 40;
  std::array<Index, 3> blocks{4, 2, 2};
  HeatOptions options;
  HeatConductivities conductivities;
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> geometry_file;
  GeometrySpec geometry;
  PhysicalConstants constants;
  InitialConcentrations initial;
  NewtonOptions newton;
  BatteryStudyConfig battery;
  HeatStudyConfig heat;
  std::filesystem::path output = "out";
  int workers = 1;

  // Throws ConfigError on empty intervals, grids or nonpositive sizes.
  void validate() const;
};

// Missing keys keep their defaults; unknown keys are an error. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);

// The same config rendered back as YAML, written next to study outputs.
std::string dump_config(const ExperimentConfig& c);

// Equidistant points including both ends; a single point is the midpoint.
std::vector<double> equidistant(double lo, double hi, int n);
// Seeded uniform draws from [lo, hi].
std::vector<double> uniform_draws(double lo, double hi, int n, std::uint64_t seed);

}  // namespace porerom::cli
