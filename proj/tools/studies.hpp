#pragma once

#include "config.hpp"

#include "porerom/battery_rom.hpp"
#include "porerom/heat.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace porerom::cli {

MaterialGrid load_geometry(const ExperimentConfig& c);

struct BatterySetup {
  MaterialGrid grid;
  OperatorDecomposition decomposition;
  Vector c0;
  std::uint64_t checksum = 0;
};

BatterySetup battery_setup(const ExperimentConfig& c);

// FOM trajectories on disk under `dir`, keyed by geometry checksum, mu, dt,
// T, constants, initial concentrations and Newton options. An empty dir
// disables caching.
class FomCache {
 public:
  FomCache(std::filesystem::path dir, const ExperimentConfig& c, std::uint64_t geometry_checksum);

  std::filesystem::path file(double mu) const;
  // Cached trajectory, or a fresh simulate() that is then stored. A cached
  // trajectory without stages is recomputed when stages are requested.
  Trajectory get(const BatterySetup& s, double mu, bool record_stages);

  int hits() const { return hits_; }
  int misses() const { return misses_; }

 private:
  std::filesystem::path dir_;
  const ExperimentConfig& cfg_;
  std::uint64_t base_key_;
  std::atomic<int> hits_{0};
  std::atomic<int> misses_{0};
};

// Runs fn(i) for i in [0, n) on `workers` threads; rethrows the first failure.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

std::vector<Trajectory> run_foms(const BatterySetup& s, FomCache& cache, const std::vector<double>& mus,
                                 bool record_stages, int workers);

// PODs of both fields and EI of both nonlinear parts at the largest sizes
// of the sweep; smaller ROMs are truncations.
struct BatteryTraining {
  ReducedBasis basis_c;
  ReducedBasis basis_phi;
  EIData ei_1c;
  EIData ei_bv;
  Index n_snapshots = 0;
  Index n_evaluations = 0;
  double seconds = 0.0;
};

// Consumes the recorded stages of `train`.
BatteryTraining train_battery(const BatterySetup& s, std::vector<Trajectory>& train, Index k_max, Index m_max);

ReducedBatteryModel rom_for(const BatterySetup& s, const BatteryTraining& t, Index k, Index m);

struct SweepCell {
  Index k = 0;  // modes per field
  Index m = 0;  // interpolation points per nonlinear part
  double err_c = 0.0;
  double err_phi = 0.0;
  double online_seconds = 0.0;  // mean over the test set
  double fom_seconds = 0.0;
  double speedup = 0.0;
  int failures = 0;  // test parameters whose reduced Newton failed
};

std::vector<SweepCell> sweep(const BatterySetup& s, const BatteryTraining& t, const std::vector<Index>& k_grid,
                             const std::vector<Index>& m_grid, const std::vector<Trajectory>& test, double dt,
                             double t_end, int workers);

struct BatteryStudyResult {
  std::vector<double> train_mu;
  std::vector<double> test_mu;
  std::vector<SweepCell> dense;
  std::vector<SweepCell> sparse;
  EIData ei_1c;
  EIData ei_bv;
  double seconds = 0.0;
};

// Writes battery_errors_dense.csv, battery_errors_sparse.csv,
// battery_pod.csv, battery_ei.csv and the largest dense ROM under rom/.
BatteryStudyResult battery_study(const ExperimentConfig& c, const std::filesystem::path& out,
                                 std::ostream* log = nullptr);

struct HeatStudyResult {
  GreedyResult global;
  GreedyResult lrbms;
  GreedyResult single;  // Lrbms on one subdomain
  double setup_seconds = 0.0;
  double online_global = 0.0;  // mean reduced solve time over the training set
  double online_lrbms = 0.0;
  double equivalence = 0.0;  // max relative difference of the single and global logs
};

// Writes heat_greedy_global.csv, heat_greedy_lrbms.csv,
// heat_equivalence.csv and heat_runtime.csv.
HeatStudyResult heat_study(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream* log = nullptr);

// geometry.bin and geometry_stats.csv (one row per material).
void geometry_command(const ExperimentConfig& c, const std::filesystem::path& out);

// Cell averaged concentration per material and mean potential on the pos
// collector boundary, one row per time step.
void write_battery_summary(const BatterySetup& s, const Trajectory& t, const std::filesystem::path& path);

// fom_trajectory.bin and fom_summary.csv for one parameter.
Trajectory fom_run(const ExperimentConfig& c, const std::filesystem::path& out, double mu);

// Loads the ROM saved by battery_study from `rom_dir`, solves one parameter
// and writes rom_summary.csv. Returns the online wall time.
double rom_eval(const ExperimentConfig& c, const std::filesystem::path& out, const std::filesystem::path& rom_dir,
                double mu, std::ostream* log = nullptr);

}  // namespace porerom::cli
