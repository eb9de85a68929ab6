#include "porerom/battery_fom.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <sstream>

namespace porerom {

DofLayout DofLayout::from_grid(const MaterialGrid& g) {
  DofLayout l;
  l.c_of_cell.assign(static_cast<std::size_t>(g.n_cells()), -1);
  for (Index cell = 0; cell < g.n_cells(); ++cell) {
    if (is_collector(g.material(cell))) continue;
    l.c_of_cell[static_cast<std::size_t>(cell)] = l.n_c++;
    l.cell_of_c.push_back(cell);
  }
  l.n_phi = g.n_cells();
  return l;
}

Vector State::packed() const {
  Vector x(c.size() + phi.size());
  x << c, phi;
  return x;
}

State State::unpack(const Vector& x, Index n_c, double time) {
  return {x.head(n_c), x.tail(x.size() - n_c), time};
}

Vector OperatorDecomposition::apply(double mu, const Vector& x, EvalStats* stats) const {
  Vector out = a_const + mu * a_bnd;
  out.noalias() += a_lin * x;
  one_over_c.add_apply(x, out, stats);
  butler_volmer.add_apply(x, out, stats);
  return out;
}

namespace {

double conductivity(Material m, const PhysicalConstants& k) {
  switch (m) {
    case Material::NegElectrode:
    case Material::NegCollector: return k.sigma_neg;
    case Material::PosElectrode:
    case Material::PosCollector: return k.sigma_pos;
    case Material::Electrolyte: return k.kappa;
  }
  return 0.0;
}

// Solid phases conduct into each other only on the same side of the cell.
bool same_solid_side(Material a, Material b) {
  auto neg = [](Material m) { return m == Material::NegElectrode || m == Material::NegCollector; };
  auto pos = [](Material m) { return m == Material::PosElectrode || m == Material::PosCollector; };
  return (neg(a) && neg(b)) || (pos(a) && pos(b));
}

void add_pair(std::vector<Triplet>& t, Index a, Index b, double trans) {
  t.emplace_back(a, a, trans);
  t.emplace_back(a, b, -trans);
  t.emplace_back(b, b, trans);
  t.emplace_back(b, a, -trans);
}

}  // namespace

OperatorDecomposition assemble_decomposition(const MaterialGrid& g, const InterfaceSet& ifaces,
                                             const PhysicalConstants& constants, double phi_dirichlet) {
  constants.validate();
  if (ifaces.count(BoundaryTag::NegCollectorBoundary) == 0) {
    throw GeometryError("no negative collector boundary faces: cannot pose the potential Dirichlet condition");
  }
  if (ifaces.count(BoundaryTag::PosCollectorBoundary) == 0) {
    throw GeometryError("no positive collector boundary faces: cannot apply the charge rate");
  }

  OperatorDecomposition d;
  d.layout = DofLayout::from_grid(g);
  d.constants = constants;
  d.phi_dirichlet = phi_dirichlet;
  const Index n = d.layout.size();
  d.a_const = Vector::Zero(n);
  d.a_bnd = Vector::Zero(n);
  d.c_volume = Vector::Constant(d.layout.n_c, g.cell_volume());
  for (Index cell : d.layout.cell_of_c) d.c_material.push_back(g.material(cell));
  d.cell_material.assign(g.labels().begin(), g.labels().end());

  std::vector<Triplet> lin;
  std::vector<NonlinearTerm> log_terms;
  const double kappa_d = constants.log_conc_coefficient();

  for (const Face& f : g.internal_faces()) {
    const Material ma = g.material(f.a);
    const Material mb = g.material(f.b);
    const double a_over_h = g.face_area(f.axis) / g.spacing(f.axis);

    // concentration diffusion, never across material boundaries
    if (ma == mb && !is_collector(ma)) {
      const double D = ma == Material::Electrolyte ? constants.D_e : constants.D_s;
      add_pair(lin, d.layout.c_dof(f.a), d.layout.c_dof(f.b), D * a_over_h);
    }

    // potential conduction
    if (ma == Material::Electrolyte && mb == Material::Electrolyte) {
      add_pair(lin, d.layout.phi_dof(f.a), d.layout.phi_dof(f.b), constants.kappa * a_over_h);
      NonlinearTerm t;
      t.src = {d.layout.c_dof(f.a), d.layout.c_dof(f.b), -1, -1};
      t.out = {d.layout.phi_dof(f.a), d.layout.phi_dof(f.b), -1, -1};
      t.coeff = kappa_d * a_over_h;
      log_terms.push_back(t);
    } else if (same_solid_side(ma, mb)) {
      const double sa = conductivity(ma, constants);
      const double sb = conductivity(mb, constants);
      const double harmonic = 2.0 * sa * sb / (sa + sb);
      add_pair(lin, d.layout.phi_dof(f.a), d.layout.phi_dof(f.b), harmonic * a_over_h);
    }
  }

  for (const BoundaryFace& bf : ifaces.boundary_faces) {
    const Index row = d.layout.phi_dof(bf.cell);
    if (bf.tag == BoundaryTag::NegCollectorBoundary) {
      // ghost value at distance h/2 outside the face
      const double trans = conductivity(g.material(bf.cell), constants) * bf.area /
                           (0.5 * g.spacing(bf.axis));
      lin.emplace_back(row, row, trans);
      d.a_const[row] -= trans * phi_dirichlet;
    } else if (bf.tag == BoundaryTag::PosCollectorBoundary) {
      d.a_bnd[row] += bf.area;
    }
  }

  std::vector<NonlinearTerm> bv_terms;
  bv_terms.reserve(ifaces.bv_faces.size());
  for (const BvFace& f : ifaces.bv_faces) {
    NonlinearTerm t;
    t.src = {d.layout.c_dof(f.electrode_cell), d.layout.c_dof(f.electrolyte_cell),
             d.layout.phi_dof(f.electrode_cell), d.layout.phi_dof(f.electrolyte_cell)};
    t.out = t.src;
    t.coeff = f.area;
    t.side = f.side;
    bv_terms.push_back(t);
  }

  d.a_lin = linalg::from_triplets(n, n, lin);
  d.one_over_c = NonlinearOperator(TermKind::LogConcentration, std::move(log_terms), n, constants);
  d.butler_volmer = NonlinearOperator(TermKind::ButlerVolmer, std::move(bv_terms), n, constants);
  return d;
}

Vector initial_concentration(const OperatorDecomposition& d, const InitialConcentrations& c0) {
  Vector c(d.layout.n_c);
  for (Index i = 0; i < d.layout.n_c; ++i) {
    switch (d.c_material[static_cast<std::size_t>(i)]) {
      case Material::NegElectrode: c[i] = c0.neg_electrode; break;
      case Material::PosElectrode: c[i] = c0.pos_electrode; break;
      default: c[i] = c0.electrolyte; break;
    }
  }
  return c;
}

double reference_potential(const PhysicalConstants& k, const InitialConcentrations& c0) {
  return open_circuit_potential(c0.neg_electrode / k.c_max_neg, ElectrodeSide::Neg).value;
}

bool admissible(const OperatorDecomposition& d, const Vector& c) {
  for (Index i = 0; i < c.size(); ++i) {
    const double v = c[i];
    if (!std::isfinite(v)) return false;
    switch (d.c_material[static_cast<std::size_t>(i)]) {
      case Material::NegElectrode:
        if (!(v > 0.0 && v < d.constants.c_max_neg)) return false;
        break;
      case Material::PosElectrode:
        if (!(v > 0.0 && v < d.constants.c_max_pos)) return false;
        break;
      default:
        if (!(v >= kConcentrationFloor)) return false;
    }
  }
  return true;
}

Vector apply_residual(const OperatorDecomposition& d, double mu, const Vector& x_new,
                      const Vector& c_old, double dt, EvalStats* stats) {
  if (x_new.size() != d.size() || c_old.size() != d.layout.n_c) {
    throw DimensionMismatch("apply_residual: state size");
  }
  Vector r = d.apply(mu, x_new, stats);
  r.head(d.layout.n_c).array() +=
      d.c_volume.array() * (x_new.head(d.layout.n_c) - c_old).array() / dt;
  return r;
}

Vector apply_residual(const OperatorDecomposition& d, double mu, const State& s_new,
                      const State& s_old, double dt) {
  return apply_residual(d, mu, s_new.packed(), s_old.c, dt);
}

SparseMatrix assemble_jacobian(const OperatorDecomposition& d, double /*mu*/, const Vector& x,
                               double dt) {
  const Index n = d.size();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.a_lin.nonZeros()) + 4 * d.one_over_c.terms().size() +
            16 * d.butler_volmer.terms().size() + static_cast<std::size_t>(d.layout.n_c));
  for (Index r = 0; r < d.a_lin.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(d.a_lin, r); it; ++it) t.emplace_back(r, it.col(), it.value());
  }
  if (dt > 0.0) {
    for (Index i = 0; i < d.layout.n_c; ++i) t.emplace_back(i, i, d.c_volume[i] / dt);
  }
  d.one_over_c.add_jacobian(x, t);
  d.butler_volmer.add_jacobian(x, t);
  return linalg::from_triplets(n, n, t);
}

SparseMatrix assemble_jacobian(const OperatorDecomposition& d, double mu, const State& s, double dt) {
  return assemble_jacobian(d, mu, s.packed(), dt);
}

Vector equilibrium_potential(const OperatorDecomposition& d, const Vector& c0) {
  // mean stoichiometry per electrode
  double s_neg = 0.0, s_pos = 0.0;
  Index n_neg = 0, n_pos = 0;
  for (Index i = 0; i < c0.size(); ++i) {
    const Material m = d.c_material[static_cast<std::size_t>(i)];
    if (m == Material::NegElectrode) {
      s_neg += c0[i] / d.constants.c_max_neg;
      ++n_neg;
    } else if (m == Material::PosElectrode) {
      s_pos += c0[i] / d.constants.c_max_pos;
      ++n_pos;
    }
  }
  const double u_neg = n_neg ? open_circuit_potential(s_neg / n_neg, ElectrodeSide::Neg).value : 0.0;
  const double u_pos = n_pos ? open_circuit_potential(s_pos / n_pos, ElectrodeSide::Pos).value : 0.0;
  const double phi_e = d.phi_dirichlet - u_neg;
  Vector phi(d.layout.n_phi);
  for (Index cell = 0; cell < d.layout.n_phi; ++cell) {
    switch (d.cell_material[static_cast<std::size_t>(cell)]) {
      case Material::Electrolyte: phi[cell] = phi_e; break;
      case Material::PosElectrode:
      case Material::PosCollector: phi[cell] = phi_e + u_pos; break;
      default: phi[cell] = d.phi_dirichlet; break;
    }
  }
  return phi;
}

namespace {

struct NewtonResult {
  Vector x;
  int iterations = 0;
  double scaled_residual = 0.0;
};

double scaled_norm(const Vector& r, const Vector& inv_scale) {
  return (r.array() * inv_scale.array()).abs().maxCoeff();
}

// Row scales of the potential equations: a_lin diagonal times the thermal voltage.
Vector potential_row_scale(const OperatorDecomposition& d) {
  const Index n_c = d.layout.n_c;
  Vector scale(d.layout.n_phi);
  const double vt = d.constants.R * d.constants.temperature / d.constants.F;
  double max_diag = 0.0;
  for (Index i = 0; i < d.layout.n_phi; ++i) {
    scale[i] = std::abs(d.a_lin.coeff(n_c + i, n_c + i));
    max_diag = std::max(max_diag, scale[i]);
  }
  for (Index i = 0; i < scale.size(); ++i) {
    if (scale[i] == 0.0) scale[i] = max_diag > 0.0 ? max_diag : 1.0;
  }
  return scale * vt;
}

// Largest change of any Butler-Volmer sinh argument allowed in one Newton
// update. The exponential kinetics make full steps overshoot by orders of
// magnitude when an electrode is far from its operating point.
constexpr double kArgumentStepCap = 2.0;

// Factorized, equilibrated Jacobian kept across Newton iterations and time
// steps. Refreshed whenever an iteration contracts the residual poorly.
struct JacobianCache {
  linalg::SparseLuSolver lu;
  Vector row_scale;
  Vector col_scale;
  bool valid = false;

  void refresh(SparseMatrix J, const Vector& rows) {
    row_scale = rows;
    J = row_scale.asDiagonal() * J;
    col_scale = Vector::Zero(J.cols());
    for (Index row = 0; row < J.outerSize(); ++row) {
      for (SparseMatrix::InnerIterator e(J, row); e; ++e) {
        col_scale[e.col()] = std::max(col_scale[e.col()], std::abs(e.value()));
      }
    }
    for (Index k = 0; k < col_scale.size(); ++k) {
      col_scale[k] = col_scale[k] > 0.0 ? 1.0 / col_scale[k] : 1.0;
    }
    lu.factorize(J * col_scale.asDiagonal());
    valid = true;
  }

  Vector solve(const Vector& r) const {
    return lu.solve(r.cwiseProduct(row_scale)).cwiseProduct(col_scale);
  }
};

// An iteration that shrinks the residual by less than this factor triggers a
// fresh Jacobian.
constexpr double kReuseContraction = 0.25;

// Damped Newton with Jacobian reuse. `residual(x)` may throw DomainError for
// inadmissible iterates, which counts as a failed trial step.
// `step_cap(x, delta)` returns the largest admissible step length in (0, 1].
template <class Residual, class Jacobian, class Admissible, class StepCap, class Record>
NewtonResult newton(Vector x, const Vector& inv_scale, const NewtonOptions& opts,
                    JacobianCache& cache, Residual&& residual, Jacobian&& jacobian,
                    Admissible&& ok, StepCap&& step_cap, Record&& record, int step_index) {
  Vector r = residual(x);
  double norm = scaled_norm(r, inv_scale);
  NewtonResult out;
  bool fresh = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (norm <= opts.tol) {
      out.x = std::move(x);
      out.iterations = it;
      out.scaled_residual = norm;
      return out;
    }
    if (!cache.valid || !opts.reuse_jacobian) {
      cache.refresh(jacobian(x), inv_scale);
      fresh = true;
    }
    const Vector delta = cache.solve(r);

    double lambda = std::min(1.0, step_cap(x, delta));
    Vector best_x;
    Vector best_r;
    double best_norm = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0;
    for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
      Vector trial = x - lambda * delta;
      if (!ok(trial)) continue;
      Vector rt;
      try {
        rt = residual(trial);
      } catch (const DomainError&) {
        continue;
      }
      const double nt = scaled_norm(rt, inv_scale);
      if (!std::isfinite(nt)) continue;
      if (nt < best_norm) {
        best_norm = nt;
        best_x = std::move(trial);
        best_r = std::move(rt);
        best_lambda = lambda;
      }
      if (nt <= norm) break;
      // a stale Jacobian gets one fresh attempt before any halving
      if (!fresh) break;
    }
    if (!fresh && !(best_norm <= kReuseContraction * norm)) {
      cache.valid = false;
      if (!(best_norm < norm)) {
        --it;
        continue;
      }
    }
    if (!std::isfinite(best_norm)) {
      std::ostringstream os;
      os << "Newton: no admissible step after " << opts.max_halvings << " halvings (step "
         << step_index << ", iteration " << it << ", scaled residual " << norm << ")";
      throw NewtonFailure(os.str(), step_index, norm);
    }
    if (fresh && !(best_norm <= kReuseContraction * norm)) cache.valid = false;
    fresh = false;
    // Without descent the smallest residual among the trials is taken.
    x = std::move(best_x);
    r = std::move(best_r);
    norm = best_norm;
    record(x);
    // stagnation at round-off
    if ((best_lambda * delta).cwiseAbs().maxCoeff() <=
            1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff()) &&
        norm <= 1e3 * opts.tol) {
      out.x = std::move(x);
      out.iterations = it + 1;
      out.scaled_residual = norm;
      return out;
    }
  }
  if (norm <= opts.tol) {
    out.x = std::move(x);
    out.iterations = opts.max_iterations;
    out.scaled_residual = norm;
    return out;
  }
  std::ostringstream os;
  os << "Newton did not converge in " << opts.max_iterations << " iterations (step " << step_index
     << ", scaled residual " << norm << ")";
  throw NewtonFailure(os.str(), step_index, norm);
}

void check_converged_arguments(const EvalStats& stats, int step) {
  if (stats.max_abs_argument >= kSinhClamp) {
    std::ostringstream os;
    os << "converged state at step " << step << " has Butler-Volmer argument "
       << stats.max_abs_argument << " beyond the clamp";
    throw StateInadmissible(os.str());
  }
}

}  // namespace

Vector consistent_initial_potential(const OperatorDecomposition& d, double mu, const Vector& c0,
                                    const NewtonOptions& opts, const Vector* phi_guess) {
  if (c0.size() != d.layout.n_c) throw DimensionMismatch("consistent_initial_potential: c0 size");
  if (!admissible(d, c0)) throw StateInadmissible("initial concentration not admissible");
  const Index n_c = d.layout.n_c;
  const Index n_phi = d.layout.n_phi;
  Vector x(d.size());
  x.head(n_c) = c0;
  x.tail(n_phi) = phi_guess ? *phi_guess : equilibrium_potential(d, c0);
  const Vector inv_scale = potential_row_scale(d).cwiseInverse();

  double mu_now = mu;
  auto residual = [&](const Vector& phi) {
    x.tail(n_phi) = phi;
    return Vector(d.apply(mu_now, x).tail(n_phi));
  };
  auto jacobian = [&](const Vector& phi) {
    x.tail(n_phi) = phi;
    SparseMatrix J = assemble_jacobian(d, mu_now, x, 0.0);
    return SparseMatrix(J.bottomRightCorner(n_phi, n_phi));
  };
  Vector dx = Vector::Zero(d.size());
  auto cap = [&](const Vector& phi, const Vector& delta) {
    x.tail(n_phi) = phi;
    dx.tail(n_phi) = delta;
    const double change = d.butler_volmer.max_argument_change(x, dx);
    return change > kArgumentStepCap ? kArgumentStepCap / change : 1.0;
  };
  auto solve_at = [&](double m, const Vector& start) {
    mu_now = m;
    JacobianCache cache;
    return newton(start, inv_scale, opts, cache, residual, jacobian,
                  [](const Vector& v) { return v.allFinite(); }, cap, [](const Vector&) {}, 0)
        .x;
  };
  const Vector start = x.tail(n_phi);
  try {
    return solve_at(mu, start);
  } catch (const NewtonFailure&) {
    if (mu == 0.0) throw;
  }
  // When the electrolyte potential is only weakly pinned by the kinetics the
  // first Newton direction from equilibrium is useless; walk up in current.
  for (int n = 8;; n *= 4) {
    try {
      Vector phi = solve_at(0.0, start);
      for (int i = 1; i <= n; ++i) phi = solve_at(mu * i / n, phi);
      return phi;
    } catch (const NewtonFailure&) {
      if (n >= 512) throw;
    }
  }
}

Trajectory simulate(const OperatorDecomposition& d, double mu, const Vector& c0, double dt,
                    double t_end, const NewtonOptions& opts, bool record_stages) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw DomainError("simulate: dt and T must be positive");
  const auto start = std::chrono::steady_clock::now();
  const Index n_steps = static_cast<Index>(std::llround(t_end / dt));
  const Index n_c = d.layout.n_c;

  Trajectory traj;
  traj.mu = mu;
  traj.dt = dt;
  traj.times.resize(n_steps + 1);
  traj.c.resize(n_c, n_steps + 1);
  traj.phi.resize(d.layout.n_phi, n_steps + 1);

  std::vector<Vector> stage_1c;
  std::vector<Vector> stage_bv;
  const auto& sup_1c = d.one_over_c.support();
  const auto& sup_bv = d.butler_volmer.support();
  auto record = [&](const Vector& x) {
    if (!record_stages) return;
    const Vector a = d.one_over_c.apply(x);
    const Vector b = d.butler_volmer.apply(x);
    Vector ca(static_cast<Index>(sup_1c.size()));
    Vector cb(static_cast<Index>(sup_bv.size()));
    for (std::size_t i = 0; i < sup_1c.size(); ++i) ca[static_cast<Index>(i)] = a[sup_1c[i]];
    for (std::size_t i = 0; i < sup_bv.size(); ++i) cb[static_cast<Index>(i)] = b[sup_bv[i]];
    stage_1c.push_back(std::move(ca));
    stage_bv.push_back(std::move(cb));
  };

  Vector x(d.size());
  x.head(n_c) = c0;
  x.tail(d.layout.n_phi) = consistent_initial_potential(d, mu, c0, opts);
  record(x);
  traj.times[0] = 0.0;
  traj.c.col(0) = x.head(n_c);
  traj.phi.col(0) = x.tail(d.layout.n_phi);

  const Vector phi_scale = potential_row_scale(d);
  Vector inv_scale(d.size());
  JacobianCache cache;
  for (Index step = 1; step <= n_steps; ++step) {
    const Vector c_old = x.head(n_c);
    for (Index i = 0; i < n_c; ++i) {
      inv_scale[i] = dt / (d.c_volume[i] * std::max(std::abs(c_old[i]), kConcentrationFloor));
    }
    inv_scale.tail(d.layout.n_phi) = phi_scale.cwiseInverse();

    auto residual = [&](const Vector& xt) { return apply_residual(d, mu, xt, c_old, dt); };
    auto jacobian = [&](const Vector& xt) { return assemble_jacobian(d, mu, xt, dt); };
    auto ok = [&](const Vector& xt) { return admissible(d, xt.head(n_c)); };
    auto cap = [&](const Vector& xt, const Vector& delta) {
      const double change = d.butler_volmer.max_argument_change(xt, delta);
      return change > kArgumentStepCap ? kArgumentStepCap / change : 1.0;
    };
    auto res = newton(x, inv_scale, opts, cache, residual, jacobian, ok, cap, record,
                      static_cast<int>(step));
    x = std::move(res.x);
    traj.newton_iterations += res.iterations;

    EvalStats stats;
    d.butler_volmer.apply(x, &stats);
    check_converged_arguments(stats, static_cast<int>(step));

    traj.times[step] = static_cast<double>(step) * dt;
    traj.c.col(step) = x.head(n_c);
    traj.phi.col(step) = x.tail(d.layout.n_phi);
  }

  if (record_stages) {
    traj.stages.one_over_c.resize(static_cast<Index>(sup_1c.size()), static_cast<Index>(stage_1c.size()));
    traj.stages.butler_volmer.resize(static_cast<Index>(sup_bv.size()), static_cast<Index>(stage_bv.size()));
    for (std::size_t j = 0; j < stage_1c.size(); ++j) {
      traj.stages.one_over_c.col(static_cast<Index>(j)) = stage_1c[j];
      traj.stages.butler_volmer.col(static_cast<Index>(j)) = stage_bv[j];
    }
  }
  traj.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

double total_lithium(const OperatorDecomposition& d, const Vector& c) {
  return d.c_volume.dot(c);
}

double total_lithium(const State& s, const MaterialGrid& g) {
  return s.c.sum() * g.cell_volume();
}

}  // namespace porerom
