#pragma once

#include "porerom/battery_fom.hpp"
#include "porerom/reduction.hpp"

#include <Eigen/LU>
#include <vector>

namespace porerom {

// Work counters of build_rom.
struct OfflineCounters {
  Index a_lin_column_products = 0;  // sparse A_lin times one basis column
};

// Galerkin-projected battery model with empirically interpolated nonlinear
// parts. Unknowns a = [a_c; a_phi] with c = basis_c a_c, phi = basis_phi a_phi.
struct ReducedBatteryModel {
  ReducedBasis basis_c;
  ReducedBasis basis_phi;
  PhysicalConstants constants;

  DenseMatrix mass;   // k_c x k_c, basis_c^T diag(vol) basis_c
  Vector a_const;     // k
  Vector a_bnd;       // k
  DenseMatrix a_lin;  // k x k

  EIData ei_1c;
  EIData ei_bv;
  RestrictedEvaluator eval_1c;
  RestrictedEvaluator eval_bv;
  DenseMatrix lift_1c;      // k x M_1c: V^T U (P^T U)^{-1}
  DenseMatrix lift_bv;      // k x M_bv
  // M'_1c x k: rows of V at the source DOFs, row-major since the online
  // Jacobian assembly walks rows
  RowMajorMatrix restrict_1c;
  RowMajorMatrix restrict_bv;  // M'_bv x k

  Vector phi_start;      // k_phi, start value of the reduced initial potential solve
  double scale_c = 1.0;  // residual scales of the two blocks, per unit dt for c
  double scale_phi = 1.0;
  OfflineCounters offline;

  Index k_c() const { return basis_c.size(); }
  Index k_phi() const { return basis_phi.size(); }
  Index size() const { return k_c() + k_phi(); }
};

// Projects every affine part and sets up the restricted evaluations. c0 is
// only used for the start value of the reduced potential solve and the
// residual scale. Throws EmptyBasis, DimensionMismatch.
ReducedBatteryModel build_rom(const OperatorDecomposition& d, const ReducedBasis& basis_c,
                              const ReducedBasis& basis_phi, const EIData& ei_1c,
                              const EIData& ei_bv, const Vector& c0);

// Euclidean projection of a full concentration vector.
Vector project_concentration(const ReducedBatteryModel& rom, const Vector& c);

// Deterministic operation counts of the online phase.
struct OnlineCounters {
  Index newton_iterations = 0;
  Index residual_evaluations = 0;
  Index jacobian_evaluations = 0;
  Index flops = 0;  // multiply-adds of the reduced algebra and restricted sources
};

struct ReducedTrajectory {
  double mu = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vector> coefficients;  // [a_c; a_phi] per time step
  double wall_seconds = 0.0;
  OnlineCounters counters;

  Index n_states() const { return static_cast<Index>(coefficients.size()); }
};

struct RomNewtonOptions {
  double tol = 1e-10;         // on the block-scaled reduced residual
  double update_tol = 1e-10;  // relative size of a full Newton update
  int max_iterations = 50;
  int max_halvings = 10;
  // keep the factorized reduced Jacobian while iterations contract well
  bool reuse_jacobian = true;
};

// Backward Euler + Newton in k dimensions. After the setup of a workspace of
// size O(k (k + M + M')) no allocation depends on the full dimension.
// Throws NewtonFailure.
ReducedTrajectory rom_simulate(const ReducedBatteryModel& rom, double mu, const Vector& a_c0,
                               double dt, double t_end, const RomNewtonOptions& opts = {});

// Same reduced system with the nonlinear parts evaluated on the full
// reconstruction and projected exactly (no interpolation).
ReducedTrajectory rom_simulate_exact(const ReducedBatteryModel& rom, const OperatorDecomposition& d,
                                     double mu, const Vector& a_c0, double dt, double t_end,
                                     const RomNewtonOptions& opts = {});

// Lift back to full c and phi fields.
Trajectory reconstruct(const ReducedBatteryModel& rom, const ReducedTrajectory& rt);

enum class Field { Concentration, Potential };

// max over parameters of (max_t ||u - u~|| / max_t ||u||), Euclidean norms.
double relative_reduction_error(const std::vector<Trajectory>& fom,
                                const std::vector<Trajectory>& rom, Field field);

}  // namespace porerom
