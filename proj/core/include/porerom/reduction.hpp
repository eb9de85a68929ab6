#pragma once

#include "porerom/linalg.hpp"

#include <functional>
#include <span>
#include <vector>

namespace porerom {

// Orthonormal reduced basis. `product` empty means the Euclidean product.
struct ReducedBasis {
  DenseMatrix modes;       // n x k
  Vector singular_values;  // all of them, descending
  SparseMatrix product;

  Index dim() const { return modes.rows(); }
  Index size() const { return modes.cols(); }
  bool euclidean() const { return product.rows() == 0; }
};

// v^T P w, or v^T w for an empty P.
double inner(const SparseMatrix& product, const Vector& v, const Vector& w);
DenseMatrix gram(const SparseMatrix& product, const DenseMatrix& a, const DenseMatrix& b);

struct PodOptions {
  enum class Mode { FixedK, RelativeTolerance };
  Mode mode = Mode::FixedK;
  Index k = 1;
  double rel_tol = 1e-8;  // keep the smallest k with sigma_{k+1} / sigma_1 <= rel_tol

  static PodOptions fixed(Index k) { return {Mode::FixedK, k, 0.0}; }
  static PodOptions relative(double eps) { return {Mode::RelativeTolerance, 0, eps}; }
};

// POD by the method of snapshots: eigenvectors of the Gram matrix S^T P S.
// Columns of `snapshots` are the snapshots. Fewer modes than requested come
// back when the snapshot span is numerically smaller. Throws EmptySnapshots.
ReducedBasis pod(const DenseMatrix& snapshots, const PodOptions& opts,
                 const SparseMatrix& product = {});
ReducedBasis pod(const std::vector<Vector>& snapshots, const PodOptions& opts,
                 const SparseMatrix& product = {});

// Sum over snapshots of the squared projection error onto `basis`.
double projection_error_squared(const ReducedBasis& basis, const DenseMatrix& snapshots);

// The leading k modes (all of them if k >= size).
ReducedBasis truncate(const ReducedBasis& basis, Index k);

// Appends `vectors` to `basis` after orthogonalization against it (two
// passes of Gram-Schmidt in the basis product). Vectors whose remainder is
// below `drop_tol` times their norm are skipped. Returns the number added.
Index extend_basis(ReducedBasis& basis, const DenseMatrix& vectors, double drop_tol = 1e-10);

// Output DOF -> sorted source DOFs it depends on.
using DependencyFn = std::function<std::vector<Index>(Index)>;

struct EIData {
  Index n_full = 0;
  std::vector<Index> rows;         // output DOF behind each collateral row
  std::vector<Index> interp_dofs;  // M output DOFs
  std::vector<Index> interp_rows;  // their positions in `rows`
  DenseMatrix collateral;          // rows.size() x M
  DenseMatrix interp_matrix;       // collateral at interp_rows, M x M unit lower triangular
  std::vector<Index> source_dofs;  // union of the dependencies of interp_dofs
  // greedy_errors[m]: max interpolation error over the training data with m
  // collateral vectors, m = 0..M
  std::vector<double> greedy_errors;
  // greedy stopped early because the remaining error vanished numerically
  bool degenerate = false;

  Index size() const { return static_cast<Index>(interp_dofs.size()); }
  // Collateral expanded to all n_full DOFs.
  DenseMatrix full_collateral() const;
};

struct EIOptions {
  Index max_size = 50;
  double abs_tol = 0.0;
  // relative to the initial error, below which a pick counts as degenerate
  double degenerate_tol = 1e-13;
};

// EI-Greedy on training evaluations. Column j of `evaluations` holds one
// operator evaluation restricted to the DOFs `rows` (all other entries of the
// n_full vector are zero). Ties in either argmax go to the lowest index.
// The matrix is consumed as greedy workspace.
EIData ei_greedy(DenseMatrix evaluations, std::span<const Index> rows, Index n_full,
                 const EIOptions& opts, const DependencyFn& dependencies);
// Evaluations given as full vectors.
EIData ei_greedy(DenseMatrix evaluations, const EIOptions& opts,
                 const DependencyFn& dependencies);

// The first m interpolation points of a greedy run, identical to a run with
// max_size m on the same data.
EIData truncate(const EIData& ei, Index m, const DependencyFn& dependencies);

// Exact "interpolation" at every DOF of `rows`: identity collateral.
EIData ei_identity(std::span<const Index> rows, Index n_full, const DependencyFn& dependencies);

// Values of a full vector at the interpolation DOFs.
Vector ei_restrict(const EIData& ei, const Vector& full);
// Coefficients interp_matrix^{-1} * values.
Vector ei_coefficients(const EIData& ei, const Vector& values_at_interp_dofs);
// collateral * interp_matrix^{-1} * values, as a full n_full vector.
Vector interpolate(const EIData& ei, const Vector& values_at_interp_dofs);

// test^T op trial, or test^T op for a vector. Throws DimensionMismatch.
DenseMatrix project_linear(const SparseMatrix& op, const DenseMatrix& trial, const DenseMatrix& test);
Vector project_linear(const Vector& op, const DenseMatrix& test);

}  // namespace porerom
