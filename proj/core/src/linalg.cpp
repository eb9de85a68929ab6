#include "porerom/linalg.hpp"

#include "porerom/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <sstream>
#include <variant>

namespace porerom::linalg {

namespace {

using ColMajor = Eigen::SparseMatrix<double, Eigen::ColMajor>;

void check_square(const SparseMatrix& A, const Vector& b) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    std::ostringstream os;
    os << "solve_sparse: matrix " << A.rows() << "x" << A.cols() << ", rhs " << b.size();
    throw DimensionMismatch(os.str());
  }
}

void check_rows_nonzero(const SparseMatrix& A) {
  for (Index r = 0; r < A.outerSize(); ++r) {
    bool nonzero = false;
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
      if (it.value() != 0.0) {
        nonzero = true;
        break;
      }
    }
    if (!nonzero) {
      throw SingularMatrix("row " + std::to_string(r) + " is identically zero");
    }
  }
}

}  // namespace

SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& triplets) {
  for (const Triplet& t : triplets) {
    if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols) {
      throw DimensionMismatch("from_triplets: entry outside the matrix");
    }
  }
  SparseMatrix A(rows, cols);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  return A;
}

struct SparseLuSolver::Impl {
  Eigen::SparseLU<ColMajor, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  Index n = -1;
  Index nnz = -1;
};

SparseLuSolver::SparseLuSolver() : impl_(std::make_unique<Impl>()) {}
SparseLuSolver::~SparseLuSolver() = default;
SparseLuSolver::SparseLuSolver(SparseLuSolver&&) noexcept = default;
SparseLuSolver& SparseLuSolver::operator=(SparseLuSolver&&) noexcept = default;

void SparseLuSolver::factorize(const SparseMatrix& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("SparseLuSolver: matrix not square");
  check_rows_nonzero(A);
  ColMajor Ac = A;
  Ac.makeCompressed();
  // The pattern analysis is reused only while the structure is unchanged.
  if (!impl_->analyzed || impl_->n != Ac.rows() || impl_->nnz != Ac.nonZeros()) {
    impl_->lu.analyzePattern(Ac);
    impl_->analyzed = true;
    impl_->n = Ac.rows();
    impl_->nnz = Ac.nonZeros();
  }
  impl_->lu.factorize(Ac);
  if (impl_->lu.info() != Eigen::Success) {
    impl_->analyzed = false;
    throw SingularMatrix("sparse LU failed: " + impl_->lu.lastErrorMessage());
  }
}

Vector SparseLuSolver::solve(const Vector& b) const {
  Vector x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite()) {
    throw SingularMatrix("sparse LU solve produced non-finite values");
  }
  return x;
}

struct IterativeSolver::Impl {
  using DiagSolver = Eigen::BiCGSTAB<ColMajor, Eigen::DiagonalPreconditioner<double>>;
  using IluSolver = Eigen::BiCGSTAB<ColMajor, Eigen::IncompleteLUT<double>>;

  ColMajor A;
  SolverOptions opts;
  std::variant<std::unique_ptr<DiagSolver>, std::unique_ptr<IluSolver>> solver;

  template <class S>
  Vector run(S& s, const Vector& b, const Vector* guess) const {
    const double bnorm = b.norm();
    if (bnorm == 0.0) return Vector::Zero(b.size());
    Vector x = guess ? s.solveWithGuess(b, *guess) : Vector(s.solve(b));
    double res = (b - A * x).norm();
    // the recurrence residual drifts from the true one; restart from x
    for (int restart = 0; restart < 3 && x.allFinite() && res > opts.tol * bnorm; ++restart) {
      x = s.solveWithGuess(b, x);
      res = (b - A * x).norm();
    }
    if (!x.allFinite() || res > opts.tol * bnorm * (1.0 + 1e-6)) {
      std::ostringstream os;
      os << "BiCGSTAB: relative residual " << res / bnorm << " after " << s.iterations()
         << " iterations (tol " << opts.tol << ")";
      throw NoConvergence(os.str(), static_cast<int>(s.iterations()), res / bnorm);
    }
    return x;
  }
};

IterativeSolver::IterativeSolver(const SparseMatrix& A, const SolverOptions& opts)
    : impl_(std::make_unique<Impl>()) {
  if (A.rows() != A.cols()) throw DimensionMismatch("IterativeSolver: matrix not square");
  impl_->A = A;
  impl_->A.makeCompressed();
  impl_->opts = opts;
  if (opts.preconditioner == Preconditioner::Diagonal) {
    auto s = std::make_unique<Impl::DiagSolver>();
    s->setTolerance(opts.tol);
    s->setMaxIterations(opts.max_iterations);
    s->compute(impl_->A);
    impl_->solver = std::move(s);
  } else {
    auto s = std::make_unique<Impl::IluSolver>();
    // small drop tolerance and unit fill factor keep ILU close to zero fill
    s->preconditioner().setDroptol(1e-4);
    s->preconditioner().setFillfactor(1);
    s->setTolerance(opts.tol);
    s->setMaxIterations(opts.max_iterations);
    s->compute(impl_->A);
    if (s->info() != Eigen::Success) throw SingularMatrix("incomplete LU failed");
    impl_->solver = std::move(s);
  }
}

IterativeSolver::~IterativeSolver() = default;
IterativeSolver::IterativeSolver(IterativeSolver&&) noexcept = default;
IterativeSolver& IterativeSolver::operator=(IterativeSolver&&) noexcept = default;

Vector IterativeSolver::solve(const Vector& b, const Vector* guess) const {
  if (b.size() != impl_->A.rows()) throw DimensionMismatch("IterativeSolver: rhs size");
  return std::visit([&](auto& s) { return impl_->run(*s, b, guess); }, impl_->solver);
}

Vector solve_sparse(const SparseMatrix& A, const Vector& b, const SolverOptions& opts) {
  check_square(A, b);
  if (opts.kind == SolverOptions::Kind::Direct) {
    SparseLuSolver lu;
    lu.factorize(A);
    return lu.solve(b);
  }
  return IterativeSolver(A, opts).solve(b);
}

SymmetricEigen sym_eig(const DenseMatrix& G) {
  if (G.rows() != G.cols()) throw DimensionMismatch("sym_eig: matrix not square");
  const double scale = G.cwiseAbs().maxCoeff();
  if (G.size() > 0 && (G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw NotSymmetric("sym_eig: matrix is not symmetric");
  }
  SymmetricEigen out;
  if (G.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(G);
  if (es.info() != Eigen::Success) throw NoConvergence("sym_eig: QR iteration failed", 0, 0.0);
  // Eigen returns ascending order
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace porerom::linalg
