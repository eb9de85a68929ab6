#pragma once

#include "porerom/face_operator.hpp"
#include "porerom/grid.hpp"
#include "porerom/kinetics.hpp"
#include "porerom/linalg.hpp"

#include <vector>

namespace porerom {

// Unknown vector layout x = [c; phi]. Collector cells carry no concentration
// unknown, every cell carries a potential unknown.
struct DofLayout {
  std::vector<Index> c_of_cell;  // -1 for collector cells
  std::vector<Index> cell_of_c;
  Index n_c = 0;
  Index n_phi = 0;

  static DofLayout from_grid(const MaterialGrid& g);

  Index size() const { return n_c + n_phi; }
  Index c_dof(Index cell) const { return c_of_cell[static_cast<std::size_t>(cell)]; }
  Index phi_dof(Index cell) const { return n_c + cell; }
};

struct State {
  Vector c;
  Vector phi;
  double time = 0.0;

  Vector packed() const;
  static State unpack(const Vector& x, Index n_c, double time = 0.0);
};

// A(x; mu) = a_const + mu * a_bnd + a_lin * x + one_over_c(x) + butler_volmer(x)
struct OperatorDecomposition {
  DofLayout layout;
  PhysicalConstants constants;
  double phi_dirichlet = 0.0;
  Vector a_const;
  Vector a_bnd;
  SparseMatrix a_lin;
  NonlinearOperator one_over_c;
  NonlinearOperator butler_volmer;
  Vector c_volume;          // volume of the cell behind each c DOF
  std::vector<Material> c_material;  // material behind each c DOF
  std::vector<Material> cell_material;

  Index size() const { return layout.size(); }
  Vector apply(double mu, const Vector& x, EvalStats* stats = nullptr) const;
};

// Two-point-flux finite volumes on the voxel grid. Dirichlet potential
// `phi_dirichlet` on the neg collector boundary, applied current density mu
// on the pos collector boundary. Throws GeometryError if either collector
// boundary is empty.
OperatorDecomposition assemble_decomposition(const MaterialGrid& g, const InterfaceSet& ifaces,
                                             const PhysicalConstants& constants, double phi_dirichlet);

// Initial concentrations per material [mol/cm^3].
struct InitialConcentrations {
  double neg_electrode = 20574e-6;
  // stoichiometry 0.2; at 2639e-6 (0.1115) the exponential term of the
  // positive OCP dominates with ~6.6e4 V and Newton cannot follow it
  double pos_electrode = 4734.2e-6;
  double electrolyte = 1200e-6;
};

Vector initial_concentration(const OperatorDecomposition& d, const InitialConcentrations& c0);

// U0 at the initial neg electrode stoichiometry, the collector Dirichlet value.
double reference_potential(const PhysicalConstants& k, const InitialConcentrations& c0);

// Residual of one backward Euler step: [vol (c_new - c_old) / dt; 0] + A(x_new).
Vector apply_residual(const OperatorDecomposition& d, double mu, const State& s_new,
                      const State& s_old, double dt);
Vector apply_residual(const OperatorDecomposition& d, double mu, const Vector& x_new,
                      const Vector& c_old, double dt, EvalStats* stats = nullptr);

// d residual / d x_new. dt <= 0 drops the time term (stationary potential rows).
SparseMatrix assemble_jacobian(const OperatorDecomposition& d, double mu, const Vector& x, double dt);
SparseMatrix assemble_jacobian(const OperatorDecomposition& d, double mu, const State& s, double dt);

struct NewtonOptions {
  double tol = 1e-10;     // on the row-scaled residual, see simulate()
  int max_iterations = 50;
  int max_halvings = 10;
  // keep the factorized Jacobian while iterations contract well
  bool reuse_jacobian = true;
};

// Potential satisfying the potential rows of the residual for fixed c0.
Vector consistent_initial_potential(const OperatorDecomposition& d, double mu, const Vector& c0,
                                    const NewtonOptions& opts = {},
                                    const Vector* phi_guess = nullptr);

// Piecewise constant potential with zero overpotential at uniform c0, used
// as Newton start value.
Vector equilibrium_potential(const OperatorDecomposition& d, const Vector& c0);

// Support-compressed operator evaluations at Newton iterates. Column j of
// `one_over_c` holds the values at d.one_over_c.support().
struct StageEvaluations {
  DenseMatrix one_over_c;
  DenseMatrix butler_volmer;
  Index count() const { return one_over_c.cols(); }
};

struct Trajectory {
  double mu = 0.0;
  double dt = 0.0;
  Vector times;
  DenseMatrix c;    // n_c x (steps + 1)
  DenseMatrix phi;  // n_phi x (steps + 1)
  StageEvaluations stages;  // empty unless recording
  int newton_iterations = 0;
  double wall_seconds = 0.0;

  Index n_states() const { return c.cols(); }
  State state(Index t) const { return {c.col(t), phi.col(t), times[t]}; }
};

// Backward Euler + Newton. Convergence: every residual row divided by its
// scale is below opts.tol, where c rows scale with vol * c_old / dt and
// potential rows with (diagonal of a_lin) * RT/F. Throws NewtonFailure or
// StateInadmissible.
Trajectory simulate(const OperatorDecomposition& d, double mu, const Vector& c0, double dt,
                    double t_end, const NewtonOptions& opts = {}, bool record_stages = false);

// Volume weighted sum of c [mol].
double total_lithium(const OperatorDecomposition& d, const Vector& c);
double total_lithium(const State& s, const MaterialGrid& g);

// True if c lies in the admissible set (electrolyte c >= floor, 0 < c_s < c_max).
bool admissible(const OperatorDecomposition& d, const Vector& c);

}  // namespace porerom
