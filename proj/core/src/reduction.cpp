#include "porerom/reduction.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace porerom {

double inner(const SparseMatrix& product, const Vector& v, const Vector& w) {
  if (product.rows() == 0) return v.dot(w);
  return v.dot(product * w);
}

DenseMatrix gram(const SparseMatrix& product, const DenseMatrix& a, const DenseMatrix& b) {
  if (product.rows() == 0) return a.transpose() * b;
  return a.transpose() * (product * b);
}

namespace {

void check_product(const SparseMatrix& product, Index n) {
  if (product.rows() != 0 && (product.rows() != n || product.cols() != n)) {
    throw DimensionMismatch("inner product matrix does not match the snapshot length");
  }
}

// Two passes of modified Gram-Schmidt of column `j` against columns [0, j).
double orthogonalize_column(DenseMatrix& q, Index j, const SparseMatrix& product) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Index i = 0; i < j; ++i) {
      const double c = inner(product, q.col(i), q.col(j));
      q.col(j) -= c * q.col(i);
    }
  }
  return std::sqrt(std::max(inner(product, q.col(j), q.col(j)), 0.0));
}

}  // namespace

namespace {

// Singular values of `s` from the Gram eigenproblem and the modes whose
// values clear its round-off floor, at most `max_modes` of them.
DenseMatrix snapshot_modes(const DenseMatrix& s, const SparseMatrix& product, Index max_modes,
                           Vector& sigma) {
  DenseMatrix g = gram(product, s, s);
  g = 0.5 * (g + g.transpose()).eval();
  const auto eig = linalg::sym_eig(g);
  sigma = eig.values.cwiseMax(0.0).cwiseSqrt();
  const double floor = sigma[0] * std::sqrt(static_cast<double>(sigma.size()) * 1e-16) * 10.0;
  Index k = 0;
  while (k < std::min(max_modes, sigma.size()) && sigma[k] > floor) ++k;
  DenseMatrix modes = s * eig.vectors.leftCols(k);
  for (Index j = 0; j < k; ++j) modes.col(j) /= sigma[j];
  return modes;
}

}  // namespace

// Method of snapshots resolves singular values only down to sqrt(eps) times
// the largest one. Snapshots with a large common part (potentials, near
// constant concentrations) need more, so the Gram step is repeated on the
// remainder orthogonal to the modes found so far, and a final small SVD of
// the projected snapshots fixes order and values.
ReducedBasis pod(const DenseMatrix& snapshots, const PodOptions& opts, const SparseMatrix& product) {
  if (snapshots.cols() == 0 || snapshots.rows() == 0) throw EmptySnapshots("pod: no snapshots");
  check_product(product, snapshots.rows());
  if (opts.mode == PodOptions::Mode::FixedK && opts.k < 0) throw DomainError("pod: negative k");

  const Index m = snapshots.cols();
  const Index cap = opts.mode == PodOptions::Mode::FixedK ? std::min(opts.k, m) : m;
  DenseMatrix basis(snapshots.rows(), 0);
  DenseMatrix rest = snapshots;
  Vector sigma;
  double s1 = -1.0;
  for (int pass = 0; pass < 8 && basis.cols() < cap; ++pass) {
    const DenseMatrix add = snapshot_modes(rest, product, cap - basis.cols(), sigma);
    if (s1 < 0.0) s1 = sigma[0];
    if (pass > 0 && !(sigma[0] > 1e-12 * s1)) break;
    if (opts.mode == PodOptions::Mode::RelativeTolerance && !(sigma[0] > opts.rel_tol * s1)) break;
    if (add.cols() == 0) break;
    const Index old = basis.cols();
    basis.conservativeResize(Eigen::NoChange, old + add.cols());
    basis.rightCols(add.cols()) = add;
    Index kept = old;
    for (Index j = old; j < basis.cols(); ++j) {
      const double before = std::sqrt(std::max(inner(product, basis.col(j), basis.col(j)), 0.0));
      basis.col(kept) = basis.col(j);
      const double nrm = orthogonalize_column(basis, kept, product);
      if (nrm > 1e-8 * before) basis.col(kept++) /= nrm;
    }
    basis.conservativeResize(Eigen::NoChange, kept);
    rest = snapshots - basis * gram(product, basis, snapshots);
  }

  ReducedBasis out;
  out.product = product;
  if (basis.cols() == 0) {
    out.singular_values = sigma;
    out.modes = DenseMatrix(snapshots.rows(), 0);
    return out;
  }
  const DenseMatrix c = gram(product, basis, snapshots);
  const Eigen::BDCSVD<DenseMatrix> svd(c, Eigen::ComputeThinU);
  const Index r = basis.cols();
  snapshot_modes(snapshots - basis * c, product, 0, sigma);
  out.singular_values.resize(m);
  out.singular_values.head(r) = svd.singularValues();
  out.singular_values.tail(m - r) = sigma.head(m - r);
  std::sort(out.singular_values.data(), out.singular_values.data() + m, std::greater<>());

  Index k = 0;
  if (opts.mode == PodOptions::Mode::FixedK) {
    k = std::min(opts.k, r);
  } else {
    const double top = out.singular_values[0];
    while (k < r && !(top == 0.0 || out.singular_values[k] <= opts.rel_tol * top)) ++k;
  }
  out.modes = basis * svd.matrixU().leftCols(k);
  for (Index j = 0; j < k; ++j) {
    const double nrm = orthogonalize_column(out.modes, j, product);
    out.modes.col(j) /= nrm;
  }
  return out;
}

ReducedBasis pod(const std::vector<Vector>& snapshots, const PodOptions& opts,
                 const SparseMatrix& product) {
  if (snapshots.empty()) throw EmptySnapshots("pod: no snapshots");
  DenseMatrix s(snapshots.front().size(), static_cast<Index>(snapshots.size()));
  for (std::size_t j = 0; j < snapshots.size(); ++j) {
    if (snapshots[j].size() != s.rows()) throw DimensionMismatch("pod: snapshots differ in length");
    s.col(static_cast<Index>(j)) = snapshots[j];
  }
  return pod(s, opts, product);
}

double projection_error_squared(const ReducedBasis& basis, const DenseMatrix& snapshots) {
  if (snapshots.rows() != basis.dim()) throw DimensionMismatch("projection error: length mismatch");
  const DenseMatrix coeff = gram(basis.product, basis.modes, snapshots);
  const DenseMatrix err = snapshots - basis.modes * coeff;
  double total = 0.0;
  for (Index j = 0; j < err.cols(); ++j) total += inner(basis.product, err.col(j), err.col(j));
  return total;
}

ReducedBasis truncate(const ReducedBasis& basis, Index k) {
  ReducedBasis out;
  out.modes = basis.modes.leftCols(std::clamp<Index>(k, 0, basis.size()));
  out.singular_values = basis.singular_values;
  out.product = basis.product;
  return out;
}

Index extend_basis(ReducedBasis& basis, const DenseMatrix& vectors, double drop_tol) {
  if (basis.modes.size() == 0) basis.modes.resize(vectors.rows(), 0);
  if (vectors.rows() != basis.dim()) throw DimensionMismatch("extend_basis: length mismatch");
  Index added = 0;
  for (Index v = 0; v < vectors.cols(); ++v) {
    const Index j = basis.modes.cols();
    basis.modes.conservativeResize(Eigen::NoChange, j + 1);
    basis.modes.col(j) = vectors.col(v);
    const double before =
        std::sqrt(std::max(inner(basis.product, vectors.col(v), vectors.col(v)), 0.0));
    const double after = orthogonalize_column(basis.modes, j, basis.product);
    if (!(before > 0.0) || !(after > drop_tol * before)) {
      basis.modes.conservativeResize(Eigen::NoChange, j);
      continue;
    }
    basis.modes.col(j) /= after;
    ++added;
  }
  return added;
}

DenseMatrix EIData::full_collateral() const {
  DenseMatrix full = DenseMatrix::Zero(n_full, size());
  for (std::size_t r = 0; r < rows.size(); ++r) full.row(rows[r]) = collateral.row(static_cast<Index>(r));
  return full;
}

namespace {

std::vector<Index> collect_sources(const std::vector<Index>& outputs, const DependencyFn& deps) {
  std::vector<Index> src;
  for (Index o : outputs) {
    const auto d = deps(o);
    src.insert(src.end(), d.begin(), d.end());
  }
  std::sort(src.begin(), src.end());
  src.erase(std::unique(src.begin(), src.end()), src.end());
  return src;
}

Index argmax_abs(const Eigen::Ref<const Vector>& v, double& value) {
  Index best = 0;
  value = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > value) {
      value = a;
      best = i;
    }
  }
  return best;
}

}  // namespace

EIData ei_greedy(DenseMatrix evaluations, std::span<const Index> rows, Index n_full,
                 const EIOptions& opts, const DependencyFn& dependencies) {
  if (evaluations.cols() == 0) throw EmptySnapshots("ei_greedy: no evaluations");
  if (evaluations.rows() != static_cast<Index>(rows.size())) {
    throw DimensionMismatch("ei_greedy: evaluation rows do not match the row map");
  }
  for (Index r : rows) {
    if (r < 0 || r >= n_full) throw DimensionMismatch("ei_greedy: row index out of range");
  }
  if (!evaluations.allFinite()) throw DomainError("ei_greedy: non-finite evaluation data");

  EIData ei;
  ei.n_full = n_full;
  ei.rows.assign(rows.begin(), rows.end());
  DenseMatrix& residual = evaluations;  // interpolation errors of every evaluation
  const Index max_size = std::min<Index>(opts.max_size, residual.rows());
  std::vector<Vector> columns;
  Eigen::RowVectorXd pivot_row;

  for (Index m = 0;; ++m) {
    Index worst = 0;
    double err = -1.0;
    for (Index j = 0; j < residual.cols(); ++j) {
      double e;
      argmax_abs(residual.col(j), e);
      if (e > err) {
        err = e;
        worst = j;
      }
    }
    ei.greedy_errors.push_back(err);
    if (m >= max_size || err <= opts.abs_tol) break;
    if (!(err > opts.degenerate_tol * ei.greedy_errors.front())) {
      ei.degenerate = true;
      break;
    }
    double pivot;
    const Index row = argmax_abs(residual.col(worst), pivot);
    Vector q = residual.col(worst) / residual(row, worst);
    pivot_row = residual.row(row);
    residual.noalias() -= q * pivot_row;
    residual.row(row).setZero();
    columns.push_back(std::move(q));
    ei.interp_rows.push_back(row);
    ei.interp_dofs.push_back(ei.rows[static_cast<std::size_t>(row)]);
  }

  const Index M = static_cast<Index>(columns.size());
  ei.collateral.resize(residual.rows(), M);
  for (Index m = 0; m < M; ++m) ei.collateral.col(m) = columns[static_cast<std::size_t>(m)];
  ei.interp_matrix.resize(M, M);
  for (Index l = 0; l < M; ++l) {
    ei.interp_matrix.row(l) = ei.collateral.row(ei.interp_rows[static_cast<std::size_t>(l)]);
  }
  ei.source_dofs = collect_sources(ei.interp_dofs, dependencies);
  return ei;
}

EIData ei_greedy(DenseMatrix evaluations, const EIOptions& opts, const DependencyFn& dependencies) {
  std::vector<Index> rows(static_cast<std::size_t>(evaluations.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  const Index n = evaluations.rows();
  return ei_greedy(std::move(evaluations), rows, n, opts, dependencies);
}

EIData truncate(const EIData& ei, Index m, const DependencyFn& dependencies) {
  const Index mm = std::clamp<Index>(m, 0, ei.size());
  EIData out;
  out.n_full = ei.n_full;
  out.rows = ei.rows;
  out.interp_dofs.assign(ei.interp_dofs.begin(), ei.interp_dofs.begin() + mm);
  out.interp_rows.assign(ei.interp_rows.begin(), ei.interp_rows.begin() + mm);
  out.collateral = ei.collateral.leftCols(mm);
  out.interp_matrix = ei.interp_matrix.topLeftCorner(mm, mm);
  out.greedy_errors.assign(ei.greedy_errors.begin(),
                           ei.greedy_errors.begin() + std::min<Index>(mm + 1, static_cast<Index>(ei.greedy_errors.size())));
  out.degenerate = ei.degenerate && mm == ei.size();
  out.source_dofs = collect_sources(out.interp_dofs, dependencies);
  return out;
}

EIData ei_identity(std::span<const Index> rows, Index n_full, const DependencyFn& dependencies) {
  EIData ei;
  ei.n_full = n_full;
  ei.rows.assign(rows.begin(), rows.end());
  const Index m = static_cast<Index>(rows.size());
  ei.interp_dofs = ei.rows;
  ei.interp_rows.resize(rows.size());
  std::iota(ei.interp_rows.begin(), ei.interp_rows.end(), Index{0});
  ei.collateral = DenseMatrix::Identity(m, m);
  ei.interp_matrix = DenseMatrix::Identity(m, m);
  ei.greedy_errors.assign(static_cast<std::size_t>(m) + 1, 0.0);
  ei.source_dofs = collect_sources(ei.interp_dofs, dependencies);
  return ei;
}

Vector ei_restrict(const EIData& ei, const Vector& full) {
  if (full.size() != ei.n_full) throw DimensionMismatch("ei_restrict: length mismatch");
  Vector v(ei.size());
  for (Index m = 0; m < ei.size(); ++m) v[m] = full[ei.interp_dofs[static_cast<std::size_t>(m)]];
  return v;
}

Vector ei_coefficients(const EIData& ei, const Vector& values) {
  if (values.size() != ei.size()) throw DimensionMismatch("ei_coefficients: length mismatch");
  return ei.interp_matrix.triangularView<Eigen::Lower>().solve(values);
}

Vector interpolate(const EIData& ei, const Vector& values) {
  const Vector coeff = ei_coefficients(ei, values);
  Vector full = Vector::Zero(ei.n_full);
  if (ei.size() == 0) return full;
  const Vector compact = ei.collateral * coeff;
  for (std::size_t r = 0; r < ei.rows.size(); ++r) full[ei.rows[r]] = compact[static_cast<Index>(r)];
  return full;
}

DenseMatrix project_linear(const SparseMatrix& op, const DenseMatrix& trial, const DenseMatrix& test) {
  if (op.cols() != trial.rows() || op.rows() != test.rows()) {
    std::ostringstream os;
    os << "project_linear: operator " << op.rows() << "x" << op.cols() << ", trial "
       << trial.rows() << " rows, test " << test.rows() << " rows";
    throw DimensionMismatch(os.str());
  }
  return test.transpose() * (op * trial);
}

Vector project_linear(const Vector& op, const DenseMatrix& test) {
  if (op.size() != test.rows()) throw DimensionMismatch("project_linear: vector length mismatch");
  return test.transpose() * op;
}

}  // namespace porerom
