#include "oracles.hpp"

#include "porerom/errors.hpp"
#include "porerom/linalg.hpp"

#include <doctest.h>

using namespace porerom;
using namespace porerom::linalg;

namespace {

SparseMatrix poisson_1d(Index n) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i > 0) t.emplace_back(i, i - 1, -1.0);
    if (i + 1 < n) t.emplace_back(i, i + 1, -1.0);
  }
  return from_triplets(n, n, t);
}

SparseMatrix random_well_conditioned(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<Index> col(0, n - 1);
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 8.0 + u(rng));
    for (int e = 0; e < 4; ++e) t.emplace_back(i, col(rng), u(rng));
  }
  return from_triplets(n, n, t);
}

}  // namespace

TEST_CASE("compressed storage: duplicates summed, columns sorted") {
  const SparseMatrix A = from_triplets(3, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 3.0}, {2, 1, -1.0}});
  CHECK(A.isCompressed());
  CHECK(A.nonZeros() == 3);
  CHECK(A.coeff(0, 2) == 4.0);
  const int* outer = A.outerIndexPtr();
  const int* inner = A.innerIndexPtr();
  for (Index r = 0; r < 3; ++r) {
    CHECK(outer[r] <= outer[r + 1]);
    for (int p = outer[r] + 1; p < outer[r + 1]; ++p) CHECK(inner[p - 1] < inner[p]);
  }
  CHECK_THROWS_AS(from_triplets(2, 2, {{2, 0, 1.0}}), DimensionMismatch);
}

TEST_CASE("identity solve returns b") {
  SparseMatrix I(4, 4);
  I.setIdentity();
  I.makeCompressed();
  const Vector b = Vector::LinSpaced(4, 1.0, 4.0);
  CHECK((solve_sparse(I, b) - b).norm() == 0.0);
  CHECK((solve_sparse(I, b, SolverOptions::iterative(1e-12, 10)) - b).norm() <= 1e-12);
}

TEST_CASE("1D Poisson against the dense solve") {
  const SparseMatrix A = poisson_1d(5);
  const Vector b = Vector::Ones(5);
  const Vector dense = DenseMatrix(A).partialPivLu().solve(b);
  const Vector x = solve_sparse(A, b);
  CHECK((x - dense).norm() <= 1e-13);
  CHECK(x.maxCoeff() == doctest::Approx(4.5));
  CHECK(x[2] == doctest::Approx(4.5));
  const Vector xi = solve_sparse(A, b, SolverOptions::iterative(1e-12, 100, Preconditioner::Diagonal));
  CHECK((A * xi - b).norm() <= 1e-12 * b.norm());
}

TEST_CASE("singular and non-converging systems") {
  const SparseMatrix Z = from_triplets(3, 3, {{0, 0, 1.0}, {2, 2, 1.0}});
  CHECK_THROWS_AS(solve_sparse(Z, Vector::Ones(3)), SingularMatrix);
  const SparseMatrix A = poisson_1d(200);
  try {
    solve_sparse(A, Vector::Ones(200), SolverOptions::iterative(1e-14, 1, Preconditioner::Diagonal));
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.residual() > 1e-14);
  }
}

TEST_CASE("solve_sparse recovers x for random well-conditioned A") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const SparseMatrix A = random_well_conditioned(60, rng);
    const Vector x = porerom::testing::random_matrix(60, 1, rng).col(0);
    const Vector b = A * x;
    CHECK((solve_sparse(A, b) - x).norm() <= 1e-12 * x.norm());
    const Vector xi = solve_sparse(A, b, SolverOptions::iterative(1e-12, 500));
    CHECK((A * xi - b).norm() <= 1e-12 * b.norm());
    CHECK((xi - x).norm() <= 1e-9 * x.norm());
  }
}

TEST_CASE("reusable factorizations") {
  const SparseMatrix A = poisson_1d(30);
  SparseLuSolver lu;
  lu.factorize(A);
  IterativeSolver it(A, SolverOptions::iterative(1e-12, 200));
  for (int i = 0; i < 3; ++i) {
    const Vector b = Vector::Constant(30, 1.0 + i);
    CHECK((A * lu.solve(b) - b).norm() <= 1e-12 * b.norm());
    CHECK((A * it.solve(b) - b).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("sym_eig: small exact cases") {
  const SymmetricEigen d = sym_eig(Vector(Eigen::Vector3d(3.0, 1.0, 2.0)).asDiagonal().toDenseMatrix());
  CHECK(d.values[0] == doctest::Approx(3.0));
  CHECK(d.values[1] == doctest::Approx(2.0));
  CHECK(d.values[2] == doctest::Approx(1.0));
  DenseMatrix G(2, 2);
  G << 2, 1, 1, 2;
  const SymmetricEigen e = sym_eig(G);
  CHECK(e.values[0] == doctest::Approx(3.0));
  CHECK(e.values[1] == doctest::Approx(1.0));
  G(0, 1) = 1.5;
  CHECK_THROWS_AS(sym_eig(G), NotSymmetric);
}

TEST_CASE("sym_eig: random symmetric reconstruction, trace, orthonormality") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix A = porerom::testing::random_matrix(10, 10, rng);
    const DenseMatrix G = A + A.transpose();
    const SymmetricEigen e = sym_eig(G);
    const double gn = G.norm();
    const DenseMatrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((G - rec).norm() <= 1e-10 * gn);
    CHECK((e.vectors.transpose() * e.vectors - DenseMatrix::Identity(10, 10)).norm() <= 1e-12);
    CHECK(std::abs(e.values.sum() - G.trace()) <= 1e-10 * std::max(1.0, std::abs(G.trace())) * gn);
    for (Index i = 0; i < 10; ++i) {
      CHECK((G * e.vectors.col(i) - e.values[i] * e.vectors.col(i)).norm() <= 1e-10 * gn);
      if (i > 0) CHECK(e.values[i - 1] >= e.values[i]);
    }
  }
}
