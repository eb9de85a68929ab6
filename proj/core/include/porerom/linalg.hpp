#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace porerom {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;  // column-major
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Compressed row storage. Always kept in compressed mode (makeCompressed) so
// column indices are sorted and unique per row.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

namespace linalg {

enum class Preconditioner { Diagonal, IncompleteLU };

struct SolverOptions {
  enum class Kind { Direct, Iterative };
  Kind kind = Kind::Direct;
  double tol = 1e-12;  // relative residual, iterative only
  int max_iterations = 2000;
  Preconditioner preconditioner = Preconditioner::IncompleteLU;

  static SolverOptions direct() { return {}; }
  static SolverOptions iterative(double tol, int max_iterations,
                                 Preconditioner p = Preconditioner::IncompleteLU) {
    return {Kind::Iterative, tol, max_iterations, p};
  }
};

// Duplicates are summed. Throws DimensionMismatch for out of range entries.
SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& triplets);

// Solves A x = b. Direct: sparse LU with partial pivoting; throws SingularMatrix.
// Iterative: preconditioned BiCGSTAB; throws NoConvergence unless
// ||b - A x|| <= tol * ||b||.
Vector solve_sparse(const SparseMatrix& A, const Vector& b,
                    const SolverOptions& opts = SolverOptions::direct());

// Reusable sparse LU factorization for repeated solves with one sparsity
// pattern (Newton iterations).
class SparseLuSolver {
 public:
  SparseLuSolver();
  ~SparseLuSolver();
  SparseLuSolver(SparseLuSolver&&) noexcept;
  SparseLuSolver& operator=(SparseLuSolver&&) noexcept;

  void factorize(const SparseMatrix& A);
  Vector solve(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Factorized iterative solver for repeated solves with one matrix.
class IterativeSolver {
 public:
  IterativeSolver(const SparseMatrix& A, const SolverOptions& opts);
  ~IterativeSolver();
  IterativeSolver(IterativeSolver&&) noexcept;
  IterativeSolver& operator=(IterativeSolver&&) noexcept;

  Vector solve(const Vector& b, const Vector* guess = nullptr) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SymmetricEigen {
  Vector values;         // descending
  DenseMatrix vectors;   // column i belongs to values[i]
};

// Eigendecomposition of a symmetric matrix. Throws NotSymmetric if
// max |G - G^T| > 1e-12 * max |G|.
SymmetricEigen sym_eig(const DenseMatrix& G);

}  // namespace linalg
}  // namespace porerom
