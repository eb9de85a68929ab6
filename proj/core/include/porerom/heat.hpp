#pragma once

#include "porerom/grid.hpp"
#include "porerom/linalg.hpp"
#include "porerom/reduction.hpp"

#include <map>
#include <utility>
#include <vector>

namespace porerom {

// Thermal conductivities of the solid materials [W/(cm K)]. Defaults are
// placeholders, not measured values. The electrolyte value is the parameter.
struct HeatConductivities {
  double neg_collector = 3.8;
  double pos_collector = 2.4;
  double neg_electrode = 0.05;
  double pos_electrode = 0.05;

  double solid(Material m) const;
};

struct HeatOptions {
  double source = 1e3;  // volumetric source inside both electrodes
  double dt = 1e-4;
  int n_steps = 10;
};

// Backward Euler system (mass/dt + b_fixed + mu b_el) T_new = q + mass T_old / dt.
// Piecewise constant temperatures, two-point fluxes. Same-material solid
// faces use the harmonic mean, solid/electrolyte faces the arithmetic mean
// so that the parameter enters affinely. Homogeneous Dirichlet on the outer
// x faces of both collectors through a ghost value half a cell away.
struct HeatModel {
  Index n = 0;
  std::array<double, 3> spacing{};
  SparseMatrix mass;
  SparseMatrix b_fixed;
  SparseMatrix b_el;
  SparseMatrix stiffness;   // unit conductivity jump form over internal faces
  SparseMatrix h1_product;  // mass + stiffness
  Vector q;
  std::vector<BoundaryFace> dirichlet_faces;
  HeatConductivities conductivities;
  double dt = 1e-4;
  int n_steps = 10;

  SparseMatrix op(double mu) const { return b_fixed + mu * b_el; }
};

// Throws GeometryError when the grid has no Dirichlet face.
HeatModel assemble_heat(const MaterialGrid& g, const HeatConductivities& k = {},
                        const HeatOptions& opts = {});

// b_fixed + mu b_el assembled face by face at one parameter value.
SparseMatrix assemble_heat_operator(const MaterialGrid& g, const HeatConductivities& k, double mu);

// Columns are T^(0) .. T^(n_steps). Throws NoConvergence, DomainError for mu <= 0.
DenseMatrix heat_solve(const HeatModel& h, double mu, double solver_tol = 1e-12);

double h1_norm(const HeatModel& h, const Vector& v);
// max over columns of the H1 norm of a - b. Throws DimensionMismatch.
double linf_h1_error(const HeatModel& h, const DenseMatrix& a, const DenseMatrix& b);

// Rows of `traj` belonging to each subdomain, in ascending cell order.
std::vector<DenseMatrix> localize(const DenseMatrix& traj, const Partition& p);
DenseMatrix delocalize(const std::vector<DenseMatrix>& parts, const Partition& p);

// Local bases, each orthonormal in the restriction of the H1 product to its
// subdomain. The global space is their direct sum.
struct LocalBasisSet {
  Partition partition;
  std::vector<ReducedBasis> bases;

  Index size() const;
  // offset of subdomain i in the concatenated coefficient vector
  std::vector<Index> offsets() const;
  Index max_local_size() const;
};

LocalBasisSet empty_local_bases(const HeatModel& h, const Partition& p);

// Galerkin projection onto a single global basis.
struct HeatReducedModel {
  DenseMatrix mass;
  DenseMatrix b_fixed;
  DenseMatrix b_el;
  Vector q;
  double dt = 0.0;
  int n_steps = 0;

  Index size() const { return q.size(); }
};

HeatReducedModel build_heat_rom(const HeatModel& h, const ReducedBasis& basis);
// Reduced coefficients, one column per time step.
DenseMatrix heat_rom_solve(const HeatReducedModel& rom, double mu);
DenseMatrix reconstruct(const ReducedBasis& basis, const DenseMatrix& coefficients);

// Block sparse projection on a LocalBasisSet: block (i, j) is stored only for
// i == j and adjacent subdomains.
struct BlockReducedModel {
  using Blocks = std::map<std::pair<int, int>, DenseMatrix>;
  std::vector<Index> sizes;
  std::vector<Index> offsets;
  Blocks mass;
  Blocks b_fixed;
  Blocks b_el;
  std::vector<Vector> q;
  double dt = 0.0;
  int n_steps = 0;

  Index size() const;
  // assembled global reduced matrix of one block family
  DenseMatrix dense(const Blocks& blocks) const;
  Vector dense_q() const;
};

BlockReducedModel build_block_rom(const HeatModel& h, const LocalBasisSet& bases);
DenseMatrix block_rom_solve(const BlockReducedModel& brm, double mu);
DenseMatrix reconstruct(const LocalBasisSet& bases, const DenseMatrix& coefficients);

enum class GreedyMode { GlobalRb, Lrbms };

struct GreedyOptions {
  std::vector<double> training;
  // stop when the max training error drops to target_rel times the error of
  // the empty basis
  double target_rel = 1e-8;
  int max_extensions = 40;
  int modes_per_extension = 1;  // per subdomain for Lrbms
  int stagnation_window = 5;
  // a (local) projection error below this fraction of the (local) trajectory
  // norm adds no mode
  double skip_tol = 1e-10;
};

struct GreedyLogEntry {
  int iteration = 0;
  double worst_mu = 0.0;
  double max_error = 0.0;
  Index basis_size = 0;
};

struct GreedyResult {
  GreedyMode mode = GreedyMode::GlobalRb;
  ReducedBasis global;   // GlobalRb
  LocalBasisSet local;   // Lrbms
  std::vector<GreedyLogEntry> log;
  std::vector<DenseMatrix> fom;  // training trajectories
  bool reached_target = false;
  double fom_seconds = 0.0;
  double greedy_seconds = 0.0;  // total, including fom_seconds
};

// POD-Greedy with the true L-infinity-in-time H1 error over the training set.
// One log entry per basis state, the first for the empty basis. Throws
// StagnationError when the error has not decreased over stagnation_window
// extensions.
GreedyResult pod_greedy(const HeatModel& h, GreedyMode mode, const GreedyOptions& opts,
                        const Partition* partition = nullptr);

}  // namespace porerom
