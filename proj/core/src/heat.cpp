#include "porerom/heat.hpp"

#include "porerom/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace porerom {

double HeatConductivities::solid(Material m) const {
  switch (m) {
    case Material::NegCollector: return neg_collector;
    case Material::PosCollector: return pos_collector;
    case Material::NegElectrode: return neg_electrode;
    case Material::PosElectrode: return pos_electrode;
    case Material::Electrolyte: break;
  }
  throw DomainError("HeatConductivities::solid: electrolyte conductivity is the parameter");
}

namespace {

// Face conductivity split into a fixed part and the coefficient of mu.
struct FaceConductivity {
  double fixed = 0.0;
  double el = 0.0;
};

FaceConductivity face_conductivity(const HeatConductivities& k, Material a, Material b) {
  const bool ea = a == Material::Electrolyte;
  const bool eb = b == Material::Electrolyte;
  if (ea && eb) return {0.0, 1.0};
  if (ea) return {0.5 * k.solid(b), 0.5};
  if (eb) return {0.5 * k.solid(a), 0.5};
  const double ka = k.solid(a);
  const double kb = k.solid(b);
  return {2.0 * ka * kb / (ka + kb), 0.0};
}

void add_face(std::vector<Triplet>& t, Index a, Index b, double w) {
  if (w == 0.0) return;
  t.emplace_back(a, a, w);
  t.emplace_back(b, b, w);
  t.emplace_back(a, b, -w);
  t.emplace_back(b, a, -w);
}

std::vector<BoundaryFace> dirichlet_faces(const MaterialGrid& g) {
  const InterfaceSet ifs = extract_interfaces(g);
  std::vector<BoundaryFace> out;
  for (const auto& f : ifs.boundary_faces) {
    if (f.tag != BoundaryTag::OuterNeumann) out.push_back(f);
  }
  if (out.empty()) throw GeometryError("assemble_heat: no collector boundary faces for the Dirichlet condition");
  return out;
}

DenseMatrix rows_of(const DenseMatrix& m, const std::vector<Index>& rows) {
  DenseMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

SparseMatrix submatrix(const SparseMatrix& m, const std::vector<Index>& rows,
                       const std::vector<Index>& cols) {
  std::vector<Index> col_pos(static_cast<std::size_t>(m.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_pos[static_cast<std::size_t>(cols[j])] = static_cast<Index>(j);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(m, rows[i]); it; ++it) {
      const Index j = col_pos[static_cast<std::size_t>(it.col())];
      if (j >= 0) t.emplace_back(static_cast<Index>(i), j, it.value());
    }
  }
  return linalg::from_triplets(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()), t);
}

// Backward Euler on a dense SPD reduced system.
DenseMatrix reduced_time_loop(const DenseMatrix& mass, const DenseMatrix& op, const Vector& q,
                              double dt, int n_steps) {
  const Index k = q.size();
  DenseMatrix out = DenseMatrix::Zero(k, n_steps + 1);
  if (k == 0) return out;
  const DenseMatrix lhs = mass / dt + op;
  Eigen::LDLT<DenseMatrix> llt(lhs);
  if (llt.info() != Eigen::Success) throw SingularMatrix("reduced heat system factorization failed");
  const DenseMatrix m_dt = mass / dt;
  for (int s = 1; s <= n_steps; ++s) {
    out.col(s) = llt.solve(q + m_dt * out.col(s - 1));
  }
  if (!out.allFinite()) throw SingularMatrix("reduced heat system is singular");
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

HeatModel assemble_heat(const MaterialGrid& g, const HeatConductivities& k, const HeatOptions& opts) {
  if (!(opts.dt > 0.0) || opts.n_steps < 1) throw DomainError("assemble_heat: dt and n_steps must be positive");
  HeatModel h;
  h.n = g.n_cells();
  h.spacing = g.voxel_size();
  h.conductivities = k;
  h.dt = opts.dt;
  h.n_steps = opts.n_steps;
  h.dirichlet_faces = dirichlet_faces(g);

  std::vector<Triplet> tf;
  std::vector<Triplet> te;
  std::vector<Triplet> ts;
  for (const Face& f : g.internal_faces()) {
    const double w = g.face_area(f.axis) / g.spacing(f.axis);
    const auto c = face_conductivity(k, g.material(f.a), g.material(f.b));
    add_face(tf, f.a, f.b, c.fixed * w);
    add_face(te, f.a, f.b, c.el * w);
    add_face(ts, f.a, f.b, w);
  }
  for (const auto& f : h.dirichlet_faces) {
    const double w = 2.0 * k.solid(g.material(f.cell)) * f.area / g.spacing(f.axis);
    tf.emplace_back(f.cell, f.cell, w);
  }
  h.b_fixed = linalg::from_triplets(h.n, h.n, tf);
  h.b_el = linalg::from_triplets(h.n, h.n, te);
  h.stiffness = linalg::from_triplets(h.n, h.n, ts);

  std::vector<Triplet> tm;
  h.q = Vector::Zero(h.n);
  const double vol = g.cell_volume();
  for (Index c = 0; c < h.n; ++c) {
    tm.emplace_back(c, c, vol);
    if (is_electrode(g.material(c))) h.q[c] = opts.source * vol;
  }
  h.mass = linalg::from_triplets(h.n, h.n, tm);
  h.h1_product = h.mass + h.stiffness;
  h.h1_product.makeCompressed();
  return h;
}

SparseMatrix assemble_heat_operator(const MaterialGrid& g, const HeatConductivities& k, double mu) {
  auto cond = [&](Material m) { return m == Material::Electrolyte ? mu : k.solid(m); };
  std::vector<Triplet> t;
  for (const Face& f : g.internal_faces()) {
    const Material a = g.material(f.a);
    const Material b = g.material(f.b);
    const double ka = cond(a);
    const double kb = cond(b);
    double kf;
    if (a == b) {
      kf = ka;
    } else if (a == Material::Electrolyte || b == Material::Electrolyte) {
      kf = 0.5 * (ka + kb);
    } else {
      kf = 2.0 * ka * kb / (ka + kb);
    }
    add_face(t, f.a, f.b, kf * g.face_area(f.axis) / g.spacing(f.axis));
  }
  for (const auto& f : dirichlet_faces(g)) {
    t.emplace_back(f.cell, f.cell, 2.0 * cond(g.material(f.cell)) * f.area / g.spacing(f.axis));
  }
  return linalg::from_triplets(g.n_cells(), g.n_cells(), t);
}

DenseMatrix heat_solve(const HeatModel& h, double mu, double solver_tol) {
  if (!(mu > 0.0)) throw DomainError("heat_solve: electrolyte conductivity must be positive");
  SparseMatrix lhs = h.mass / h.dt + h.op(mu);
  lhs.makeCompressed();
  const linalg::IterativeSolver solver(lhs, linalg::SolverOptions::iterative(solver_tol, 5000));
  DenseMatrix out = DenseMatrix::Zero(h.n, h.n_steps + 1);
  for (int s = 1; s <= h.n_steps; ++s) {
    const Vector prev = out.col(s - 1);
    const Vector rhs = h.q + h.mass * prev / h.dt;
    out.col(s) = solver.solve(rhs, &prev);
  }
  return out;
}

double h1_norm(const HeatModel& h, const Vector& v) {
  if (v.size() != h.n) throw DimensionMismatch("h1_norm: vector length");
  return std::sqrt(std::max(0.0, v.dot(h.h1_product * v)));
}

double linf_h1_error(const HeatModel& h, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != h.n) {
    throw DimensionMismatch("linf_h1_error: trajectory shapes differ");
  }
  double err = 0.0;
  for (Index t = 0; t < a.cols(); ++t) err = std::max(err, h1_norm(h, a.col(t) - b.col(t)));
  return err;
}

std::vector<DenseMatrix> localize(const DenseMatrix& traj, const Partition& p) {
  std::vector<DenseMatrix> out;
  out.reserve(p.subdomain_cells.size());
  for (const auto& cells : p.subdomain_cells) out.push_back(rows_of(traj, cells));
  return out;
}

DenseMatrix delocalize(const std::vector<DenseMatrix>& parts, const Partition& p) {
  if (parts.size() != p.subdomain_cells.size()) throw DimensionMismatch("delocalize: part count");
  const Index cols = parts.empty() ? 0 : parts.front().cols();
  DenseMatrix out(static_cast<Index>(p.cell_to_subdomain.size()), cols);
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto& cells = p.subdomain_cells[s];
    if (parts[s].rows() != static_cast<Index>(cells.size()) || parts[s].cols() != cols) {
      throw DimensionMismatch("delocalize: part shape");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out.row(cells[i]) = parts[s].row(static_cast<Index>(i));
  }
  return out;
}

Index LocalBasisSet::size() const {
  Index n = 0;
  for (const auto& b : bases) n += b.size();
  return n;
}

std::vector<Index> LocalBasisSet::offsets() const {
  std::vector<Index> off(bases.size() + 1, 0);
  for (std::size_t i = 0; i < bases.size(); ++i) off[i + 1] = off[i] + bases[i].size();
  return off;
}

Index LocalBasisSet::max_local_size() const {
  Index m = 0;
  for (const auto& b : bases) m = std::max(m, b.size());
  return m;
}

LocalBasisSet empty_local_bases(const HeatModel& h, const Partition& p) {
  if (static_cast<Index>(p.cell_to_subdomain.size()) != h.n) {
    throw DimensionMismatch("empty_local_bases: partition belongs to another grid");
  }
  LocalBasisSet set;
  set.partition = p;
  for (const auto& cells : p.subdomain_cells) {
    ReducedBasis b;
    b.product = submatrix(h.h1_product, cells, cells);
    b.modes = DenseMatrix(static_cast<Index>(cells.size()), 0);
    set.bases.push_back(std::move(b));
  }
  return set;
}

HeatReducedModel build_heat_rom(const HeatModel& h, const ReducedBasis& basis) {
  if (basis.dim() != h.n) throw DimensionMismatch("build_heat_rom: basis length");
  HeatReducedModel rom;
  rom.mass = project_linear(h.mass, basis.modes, basis.modes);
  rom.b_fixed = project_linear(h.b_fixed, basis.modes, basis.modes);
  rom.b_el = project_linear(h.b_el, basis.modes, basis.modes);
  rom.q = project_linear(h.q, basis.modes);
  rom.dt = h.dt;
  rom.n_steps = h.n_steps;
  return rom;
}

DenseMatrix heat_rom_solve(const HeatReducedModel& rom, double mu) {
  return reduced_time_loop(rom.mass, rom.b_fixed + mu * rom.b_el, rom.q, rom.dt, rom.n_steps);
}

DenseMatrix reconstruct(const ReducedBasis& basis, const DenseMatrix& coefficients) {
  if (coefficients.rows() != basis.size()) throw DimensionMismatch("reconstruct: coefficient length");
  return basis.modes * coefficients;
}

Index BlockReducedModel::size() const { return offsets.empty() ? 0 : offsets.back(); }

DenseMatrix BlockReducedModel::dense(const Blocks& blocks) const {
  DenseMatrix out = DenseMatrix::Zero(size(), size());
  for (const auto& [ij, blk] : blocks) {
    const auto [i, j] = ij;
    out.block(offsets[static_cast<std::size_t>(i)], offsets[static_cast<std::size_t>(j)], blk.rows(),
              blk.cols()) = blk;
  }
  return out;
}

Vector BlockReducedModel::dense_q() const {
  Vector out(size());
  for (std::size_t i = 0; i < q.size(); ++i) out.segment(offsets[i], q[i].size()) = q[i];
  return out;
}

BlockReducedModel build_block_rom(const HeatModel& h, const LocalBasisSet& set) {
  const Partition& p = set.partition;
  const int ns = p.n_subdomains();
  if (static_cast<int>(set.bases.size()) != ns || static_cast<Index>(p.cell_to_subdomain.size()) != h.n) {
    throw DimensionMismatch("build_block_rom: bases do not match the partition or the model");
  }
  BlockReducedModel brm;
  brm.dt = h.dt;
  brm.n_steps = h.n_steps;
  brm.offsets = set.offsets();
  for (int i = 0; i < ns; ++i) {
    const auto& cells = p.subdomain_cells[static_cast<std::size_t>(i)];
    const auto& b = set.bases[static_cast<std::size_t>(i)];
    if (b.dim() != static_cast<Index>(cells.size())) {
      throw DimensionMismatch("build_block_rom: local basis length differs from the subdomain size");
    }
    brm.sizes.push_back(b.size());
    brm.q.push_back(b.modes.transpose() * rows_of(h.q, cells));
  }

  // local operator rows of i against columns of j, then the local projections
  for (int i = 0; i < ns; ++i) {
    std::vector<int> partners = p.neighbors(i);
    partners.push_back(i);
    std::sort(partners.begin(), partners.end());
    const auto& ci = p.subdomain_cells[static_cast<std::size_t>(i)];
    const auto& vi = set.bases[static_cast<std::size_t>(i)].modes;
    for (int j : partners) {
      const auto& cj = p.subdomain_cells[static_cast<std::size_t>(j)];
      const auto& vj = set.bases[static_cast<std::size_t>(j)].modes;
      auto project = [&](const SparseMatrix& op) -> DenseMatrix {
        return vi.transpose() * (submatrix(op, ci, cj) * vj);
      };
      brm.mass[{i, j}] = project(h.mass);
      brm.b_fixed[{i, j}] = project(h.b_fixed);
      brm.b_el[{i, j}] = project(h.b_el);
    }
  }
  return brm;
}

DenseMatrix block_rom_solve(const BlockReducedModel& brm, double mu) {
  return reduced_time_loop(brm.dense(brm.mass), brm.dense(brm.b_fixed) + mu * brm.dense(brm.b_el),
                           brm.dense_q(), brm.dt, brm.n_steps);
}

DenseMatrix reconstruct(const LocalBasisSet& set, const DenseMatrix& coefficients) {
  const auto off = set.offsets();
  if (coefficients.rows() != off.back()) throw DimensionMismatch("reconstruct: coefficient length");
  std::vector<DenseMatrix> parts;
  parts.reserve(set.bases.size());
  for (std::size_t i = 0; i < set.bases.size(); ++i) {
    parts.push_back(set.bases[i].modes * coefficients.middleRows(off[i], set.bases[i].size()));
  }
  return delocalize(parts, set.partition);
}

namespace {

// Projection error of `u` onto an orthonormal basis in its product, and its
// leading POD modes unless the error is negligible against `u` itself.
Index extend_with_error_modes(ReducedBasis& basis, const DenseMatrix& u, int modes, double skip_tol) {
  DenseMatrix err = u;
  if (basis.size() > 0) err -= basis.modes * gram(basis.product, basis.modes, u);
  auto fro = [&](const DenseMatrix& m) {
    double s = 0.0;
    for (Index j = 0; j < m.cols(); ++j) s += inner(basis.product, m.col(j), m.col(j));
    return std::sqrt(std::max(0.0, s));
  };
  const double ref = fro(u);
  if (ref == 0.0 || fro(err) <= skip_tol * ref) return 0;
  const ReducedBasis pod_err = pod(err, PodOptions::fixed(modes), basis.product);
  return extend_basis(basis, pod_err.modes);
}

}  // namespace

GreedyResult pod_greedy(const HeatModel& h, GreedyMode mode, const GreedyOptions& opts,
                        const Partition* partition) {
  if (opts.training.empty()) throw DomainError("pod_greedy: empty training set");
  if (mode == GreedyMode::Lrbms && partition == nullptr) {
    throw InvalidBlocks("pod_greedy: the localized mode needs a partition");
  }
  const auto t0 = std::chrono::steady_clock::now();
  GreedyResult res;
  res.mode = mode;
  for (double mu : opts.training) res.fom.push_back(heat_solve(h, mu));
  res.fom_seconds = seconds_since(t0);

  if (mode == GreedyMode::GlobalRb) {
    res.global.product = h.h1_product;
    res.global.modes = DenseMatrix(h.n, 0);
  } else {
    res.local = empty_local_bases(h, *partition);
  }

  auto rom_trajectory = [&](double mu) -> DenseMatrix {
    if (mode == GreedyMode::GlobalRb) {
      if (res.global.size() == 0) return DenseMatrix::Zero(h.n, h.n_steps + 1);
      return reconstruct(res.global, heat_rom_solve(build_heat_rom(h, res.global), mu));
    }
    if (res.local.size() == 0) return DenseMatrix::Zero(h.n, h.n_steps + 1);
    return reconstruct(res.local, block_rom_solve(build_block_rom(h, res.local), mu));
  };

  double initial = 0.0;
  for (int it = 0;; ++it) {
    double worst = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < opts.training.size(); ++i) {
      const double e = linf_h1_error(h, res.fom[i], rom_trajectory(opts.training[i]));
      if (e > worst) {
        worst = e;
        arg = i;
      }
    }
    const Index size = mode == GreedyMode::GlobalRb ? res.global.size() : res.local.size();
    res.log.push_back({it, opts.training[arg], worst, size});
    if (it == 0) initial = worst;
    if (worst <= opts.target_rel * initial) {
      res.reached_target = true;
      break;
    }
    if (it >= opts.max_extensions) break;
    const int w = opts.stagnation_window;
    if (w > 0 && it >= w && worst >= res.log[static_cast<std::size_t>(it - w)].max_error) {
      std::ostringstream os;
      os << "pod_greedy: error " << worst << " has not decreased over " << w << " extensions";
      throw StagnationError(os.str());
    }

    const DenseMatrix& u = res.fom[arg];
    Index added = 0;
    if (mode == GreedyMode::GlobalRb) {
      added = extend_with_error_modes(res.global, u, opts.modes_per_extension, opts.skip_tol);
    } else {
      const auto parts = localize(u, res.local.partition);
      for (std::size_t s = 0; s < parts.size(); ++s) {
        added += extend_with_error_modes(res.local.bases[s], parts[s], opts.modes_per_extension,
                                         opts.skip_tol);
      }
    }
    if (added == 0) break;  // trajectory already resolved to skip_tol
  }
  res.greedy_seconds = seconds_since(t0);
  return res;
}

}  // namespace porerom
