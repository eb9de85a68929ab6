#include "porerom/battery_rom.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace porerom {

namespace {

constexpr double kArgumentStepCap = 2.0;
// An iteration contracting the residual by less than this refreshes the Jacobian.
constexpr double kReuseContraction = 0.25;

RowMajorMatrix source_rows(const std::vector<Index>& sources, const ReducedBasis& bc,
                           const ReducedBasis& bp) {
  const Index n_c = bc.dim();
  RowMajorMatrix r = RowMajorMatrix::Zero(static_cast<Index>(sources.size()), bc.size() + bp.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Index s = sources[i];
    const auto row = static_cast<Index>(i);
    if (s < n_c) {
      r.row(row).head(bc.size()) = bc.modes.row(s);
    } else {
      r.row(row).tail(bp.size()) = bp.modes.row(s - n_c);
    }
  }
  return r;
}

DenseMatrix project_rows(const DenseMatrix& full, const ReducedBasis& bc, const ReducedBasis& bp) {
  const Index n_c = bc.dim();
  DenseMatrix out(bc.size() + bp.size(), full.cols());
  out.topRows(bc.size()) = bc.modes.transpose() * full.topRows(n_c);
  out.bottomRows(bp.size()) = bp.modes.transpose() * full.bottomRows(bp.dim());
  return out;
}

DenseMatrix lift(const EIData& ei, const ReducedBasis& bc, const ReducedBasis& bp) {
  const Index k = bc.size() + bp.size();
  if (ei.size() == 0) return DenseMatrix(k, 0);
  const DenseMatrix vtu = project_rows(ei.full_collateral(), bc, bp);
  // W P^T U = V^T U with P^T U lower triangular
  return ei.interp_matrix.transpose()
      .triangularView<Eigen::Upper>()
      .solve(vtu.transpose())
      .transpose();
}

}  // namespace

ReducedBatteryModel build_rom(const OperatorDecomposition& d, const ReducedBasis& basis_c,
                              const ReducedBasis& basis_phi, const EIData& ei_1c,
                              const EIData& ei_bv, const Vector& c0) {
  const Index n_c = d.layout.n_c;
  const Index n_phi = d.layout.n_phi;
  if (basis_c.size() == 0 || basis_phi.size() == 0) {
    throw EmptyBasis("build_rom: both the concentration and the potential basis need modes");
  }
  if (basis_c.dim() != n_c || basis_phi.dim() != n_phi) {
    throw DimensionMismatch("build_rom: basis length does not match the DOF layout");
  }
  if (ei_1c.n_full != d.size() || ei_bv.n_full != d.size()) {
    throw DimensionMismatch("build_rom: EI data built for a different system size");
  }
  if (c0.size() != n_c) throw DimensionMismatch("build_rom: c0 length");

  ReducedBatteryModel rom;
  rom.basis_c = basis_c;
  rom.basis_phi = basis_phi;
  rom.constants = d.constants;
  const Index kc = basis_c.size();
  const Index k = rom.size();

  rom.mass = basis_c.modes.transpose() * d.c_volume.asDiagonal() * basis_c.modes;
  rom.a_const.resize(k);
  rom.a_const << basis_c.modes.transpose() * d.a_const.head(n_c),
      basis_phi.modes.transpose() * d.a_const.tail(n_phi);
  rom.a_bnd.resize(k);
  rom.a_bnd << basis_c.modes.transpose() * d.a_bnd.head(n_c),
      basis_phi.modes.transpose() * d.a_bnd.tail(n_phi);

  rom.a_lin.resize(k, k);
  Vector column = Vector::Zero(d.size());
  for (Index j = 0; j < k; ++j) {
    column.setZero();
    if (j < kc) {
      column.head(n_c) = basis_c.modes.col(j);
    } else {
      column.tail(n_phi) = basis_phi.modes.col(j - kc);
    }
    const Vector image = d.a_lin * column;
    ++rom.offline.a_lin_column_products;
    rom.a_lin.col(j) << basis_c.modes.transpose() * image.head(n_c),
        basis_phi.modes.transpose() * image.tail(n_phi);
  }

  rom.ei_1c = ei_1c;
  rom.ei_bv = ei_bv;
  rom.eval_1c = d.one_over_c.restrict_to(ei_1c.interp_dofs);
  rom.eval_bv = d.butler_volmer.restrict_to(ei_bv.interp_dofs);
  rom.lift_1c = lift(ei_1c, basis_c, basis_phi);
  rom.lift_bv = lift(ei_bv, basis_c, basis_phi);
  rom.restrict_1c = source_rows(rom.eval_1c.source_dofs(), basis_c, basis_phi);
  rom.restrict_bv = source_rows(rom.eval_bv.source_dofs(), basis_c, basis_phi);

  rom.phi_start = basis_phi.modes.transpose() * equilibrium_potential(d, c0);
  rom.scale_c = d.c_volume.mean() * std::max(c0.cwiseAbs().mean(), kConcentrationFloor);
  std::vector<double> diag(static_cast<std::size_t>(n_phi));
  for (Index i = 0; i < n_phi; ++i) diag[static_cast<std::size_t>(i)] = std::abs(d.a_lin.coeff(n_c + i, n_c + i));
  std::nth_element(diag.begin(), diag.begin() + static_cast<long>(diag.size() / 2), diag.end());
  const double vt = d.constants.R * d.constants.temperature / d.constants.F;
  rom.scale_phi = std::max(diag[diag.size() / 2], std::numeric_limits<double>::min()) * vt;
  return rom;
}

Vector project_concentration(const ReducedBatteryModel& rom, const Vector& c) {
  if (c.size() != rom.basis_c.dim()) throw DimensionMismatch("project_concentration: length");
  return rom.basis_c.modes.transpose() * c;
}

namespace {

// Nonlinear parts of the reduced residual.
class ReducedNonlinearity {
 public:
  virtual ~ReducedNonlinearity() = default;
  // r += V^T N(V a); J += V^T N'(V a) V when J is given.
  virtual void add(const Vector& a, Vector& r, DenseMatrix* J, OnlineCounters& cnt) = 0;
  virtual double argument_change(const Vector& a, const Vector& delta) = 0;
};

// One interpolated operator: sources from the restricted basis rows, values at
// the interpolation DOFs, lifted by the precomputed k x M matrix. Source DOFs
// are sorted, so the restricted rows split into a concentration block on top
// and a potential block below; only those blocks are touched.
struct InterpolatedPart {
  const RestrictedEvaluator* eval;
  const RowMajorMatrix* rows;  // restricted basis rows, sources x k
  const DenseMatrix* lift;
  Index kc = 0, kp = 0, nsc = 0, nsp = 0;
  Vector src, dsrc, out, jac;
  Vector src_at;  // coefficients of the last evaluation in `ws`
  RestrictedEvaluator::Workspace ws;
  DenseMatrix tmp;  // k x M

  InterpolatedPart(const RestrictedEvaluator& e, const RowMajorMatrix& r, const DenseMatrix& l, Index k_c,
                   Index n_c)
      : eval(&e), rows(&r), lift(&l), kc(k_c), kp(r.cols() - k_c) {
    const auto& sd = e.source_dofs();
    nsc = std::lower_bound(sd.begin(), sd.end(), n_c) - sd.begin();
    nsp = r.rows() - nsc;
    src.resize(r.rows());
    dsrc.resize(r.rows());
    src_at = Vector::Constant(r.cols(), std::numeric_limits<double>::quiet_NaN());
    out.resize(l.cols());
    jac.resize(static_cast<Index>(e.jacobian_nonzeros()));
    ws = e.workspace();
    tmp.resize(r.cols(), l.cols());
  }

  void restrict_to(const Vector& a, Vector& s) const {
    s.head(nsc).noalias() = rows->topLeftCorner(nsc, kc) * a.head(kc);
    s.tail(nsp).noalias() = rows->bottomRightCorner(nsp, kp) * a.tail(kp);
  }

  void add(const Vector& a, Vector& r, DenseMatrix* J, OnlineCounters& cnt) {
    const Index k = a.size();
    const Index m = out.size();
    if (m == 0) return;
    restrict_to(a, src);
    src_at = a;
    std::span<double> jspan = J ? std::span<double>(jac.data(), static_cast<std::size_t>(jac.size()))
                                : std::span<double>();
    eval->evaluate({src.data(), static_cast<std::size_t>(src.size())},
                   {out.data(), static_cast<std::size_t>(out.size())}, jspan, ws);
    r.noalias() += *lift * out;
    cnt.flops += nsc * kc + nsp * kp + k * m + static_cast<Index>(eval->jacobian_nonzeros());
    if (!J) return;
    tmp.setZero();
    const auto& jr = eval->jacobian_rows();
    const auto& jc = eval->jacobian_cols();
    for (std::size_t e = 0; e < jr.size(); ++e) {
      const double v = jac[static_cast<Index>(e)];
      const Index c = jc[e];
      if (c < nsc) {
        tmp.col(jr[e]).head(kc) += v * rows->row(c).head(kc).transpose();
      } else {
        tmp.col(jr[e]).tail(kp) += v * rows->row(c).tail(kp).transpose();
      }
    }
    J->noalias() += *lift * tmp.transpose();
    cnt.flops += static_cast<Index>(jr.size()) * k + k * m * k;
  }

  double argument_change(const Vector& a, const Vector& delta) {
    if (out.size() == 0) return 0.0;
    // usually called at the point of the last residual
    if (src_at != a) {
      restrict_to(a, src);
      src_at = a;
      eval->evaluate({src.data(), static_cast<std::size_t>(src.size())},
                     {out.data(), static_cast<std::size_t>(out.size())}, {}, ws);
    }
    restrict_to(delta, dsrc);
    return eval->max_argument_change(ws, {dsrc.data(), static_cast<std::size_t>(dsrc.size())});
  }
};

class InterpolatedNonlinearity final : public ReducedNonlinearity {
 public:
  explicit InterpolatedNonlinearity(const ReducedBatteryModel& rom)
      : one_over_c_(rom.eval_1c, rom.restrict_1c, rom.lift_1c, rom.k_c(), rom.basis_c.dim()),
        butler_volmer_(rom.eval_bv, rom.restrict_bv, rom.lift_bv, rom.k_c(), rom.basis_c.dim()) {}

  void add(const Vector& a, Vector& r, DenseMatrix* J, OnlineCounters& cnt) override {
    one_over_c_.add(a, r, J, cnt);
    butler_volmer_.add(a, r, J, cnt);
  }
  double argument_change(const Vector& a, const Vector& delta) override {
    return butler_volmer_.argument_change(a, delta);
  }

 private:
  InterpolatedPart one_over_c_;
  InterpolatedPart butler_volmer_;
};

class ExactNonlinearity final : public ReducedNonlinearity {
 public:
  ExactNonlinearity(const ReducedBatteryModel& rom, const OperatorDecomposition& d) : d_(d) {
    v_ = DenseMatrix::Zero(d.size(), rom.size());
    v_.topLeftCorner(rom.basis_c.dim(), rom.k_c()) = rom.basis_c.modes;
    v_.bottomRightCorner(rom.basis_phi.dim(), rom.k_phi()) = rom.basis_phi.modes;
  }

  void add(const Vector& a, Vector& r, DenseMatrix* J, OnlineCounters& cnt) override {
    const Vector x = v_ * a;
    Vector out = d_.one_over_c.apply(x);
    d_.butler_volmer.add_apply(x, out);
    r.noalias() += v_.transpose() * out;
    cnt.flops += 2 * v_.size();
    if (!J) return;
    std::vector<Triplet> t;
    d_.one_over_c.add_jacobian(x, t);
    d_.butler_volmer.add_jacobian(x, t);
    const SparseMatrix jn = linalg::from_triplets(d_.size(), d_.size(), t);
    J->noalias() += v_.transpose() * (jn * v_);
  }

  double argument_change(const Vector& a, const Vector& delta) override {
    return d_.butler_volmer.max_argument_change(v_ * a, v_ * delta);
  }

 private:
  const OperatorDecomposition& d_;
  DenseMatrix v_;
};

// Reduced backward Euler + Newton with all buffers sized at construction.
class ReducedSolver {
 public:
  ReducedSolver(const ReducedBatteryModel& rom, ReducedNonlinearity& nl, double mu,
                const RomNewtonOptions& opts)
      : rom_(rom), nl_(nl), mu_(mu), opts_(opts) {
    const Index k = rom.size();
    r_.resize(k);
    r_trial_.resize(k);
    r_best_.resize(k);
    delta_.resize(k);
    trial_.resize(k);
    best_.resize(k);
    a_c_old_.resize(rom.k_c());
    J_.resize(k, k);
    lu_ = Eigen::PartialPivLU<DenseMatrix>(k);
    lu_phi_ = Eigen::PartialPivLU<DenseMatrix>(rom.k_phi());
  }

  OnlineCounters& counters() { return cnt_; }

  // Potential coefficients for fixed concentration coefficients.
  void solve_potential(Vector& a) { newton(a, 0.0, true, 0); }

  void step(Vector& a, double dt, int index) {
    a_c_old_ = a.head(rom_.k_c());
    newton(a, dt, false, index);
  }

 private:
  void residual(const Vector& a, double dt, Vector& r, DenseMatrix* J) {
    const Index kc = rom_.k_c();
    r = rom_.a_const;
    r.noalias() += mu_ * rom_.a_bnd;
    r.noalias() += rom_.a_lin * a;
    if (dt > 0.0) r.head(kc).noalias() += rom_.mass * ((a.head(kc) - a_c_old_) / dt);
    ++cnt_.residual_evaluations;
    cnt_.flops += rom_.size() * rom_.size();
    if (J) {
      *J = rom_.a_lin;
      if (dt > 0.0) J->topLeftCorner(kc, kc) += rom_.mass / dt;
      ++cnt_.jacobian_evaluations;
    }
    nl_.add(a, r, J, cnt_);
  }

  double norm(const Vector& r, double dt, bool potential_only) const {
    const Index kc = rom_.k_c();
    const double np = r.tail(rom_.k_phi()).cwiseAbs().maxCoeff() / rom_.scale_phi;
    if (potential_only) return np;
    const double nc = r.head(kc).cwiseAbs().maxCoeff() * dt / rom_.scale_c;
    return std::max(nc, np);
  }

  bool small_update(const Vector& a, bool potential_only) const {
    const Index kc = rom_.k_c();
    const Index kp = rom_.k_phi();
    auto tiny = [&](Index off, Index len) {
      const double size = a.segment(off, len).cwiseAbs().maxCoeff();
      return delta_.segment(off, len).cwiseAbs().maxCoeff() <=
             opts_.update_tol * std::max(size, std::numeric_limits<double>::min());
    };
    if (potential_only) return tiny(kc, kp);
    return tiny(0, kc) && tiny(kc, kp);
  }

  void newton(Vector& a, double dt, bool potential_only, int index) {
    try {
      iterate(a, dt, potential_only, index);
    } catch (const DomainError& e) {
      std::ostringstream os;
      os << "reduced Newton left the admissible set (step " << index << "): " << e.what();
      throw NewtonFailure(os.str(), index, std::numeric_limits<double>::infinity());
    }
  }

  void iterate(Vector& a, double dt, bool potential_only, int index) {
    const Index kc = rom_.k_c();
    const Index kp = rom_.k_phi();
    residual(a, dt, r_, nullptr);
    double nrm = norm(r_, dt, potential_only);
    bool fresh = false;
    for (int it = 0; it < opts_.max_iterations; ++it) {
      if (nrm <= opts_.tol) return;
      if (potential_only) {
        residual(a, dt, r_, &J_);
        lu_phi_.compute(J_.bottomRightCorner(kp, kp));
        cnt_.flops += kp * kp * kp;
        fresh = true;
      } else if (!lu_valid_ || !opts_.reuse_jacobian) {
        residual(a, dt, r_, &J_);
        lu_.compute(J_);
        cnt_.flops += rom_.size() * rom_.size() * rom_.size();
        lu_valid_ = true;
        fresh = true;
      }
      ++cnt_.newton_iterations;
      if (potential_only) {
        delta_.head(kc).setZero();
        delta_.tail(kp) = lu_phi_.solve(r_.tail(kp));
      } else {
        delta_ = lu_.solve(r_);
      }
      cnt_.flops += rom_.size() * rom_.size();
      if (!delta_.allFinite()) {
        if (fresh) break;
        lu_valid_ = false;
        continue;
      }

      const double change = nl_.argument_change(a, delta_);
      double lambda = change > kArgumentStepCap ? kArgumentStepCap / change : 1.0;
      const bool tiny = lambda == 1.0 && small_update(a, potential_only);
      double best_norm = std::numeric_limits<double>::infinity();
      for (int h = 0; h <= opts_.max_halvings; ++h, lambda *= 0.5) {
        trial_ = a;
        trial_.noalias() -= lambda * delta_;
        double nt;
        try {
          residual(trial_, dt, r_trial_, nullptr);
          nt = norm(r_trial_, dt, potential_only);
        } catch (const DomainError&) {
          continue;
        }
        if (!std::isfinite(nt)) continue;
        if (nt < best_norm) {
          best_norm = nt;
          best_ = trial_;
          r_best_ = r_trial_;
        }
        if (nt <= nrm) break;
        // a stale Jacobian gets a fresh attempt before any halving
        if (!fresh) break;
      }
      if (!fresh && !(best_norm <= kReuseContraction * nrm)) {
        lu_valid_ = false;
        if (!(best_norm < nrm)) continue;
      }
      if (!std::isfinite(best_norm)) break;
      if (fresh && !(best_norm <= kReuseContraction * nrm)) lu_valid_ = false;
      fresh = false;
      a = best_;
      r_ = r_best_;
      nrm = best_norm;
      if (tiny) return;
    }
    if (nrm <= opts_.tol) return;
    std::ostringstream os;
    os << "reduced Newton did not converge (step " << index << ", scaled residual " << nrm << ")";
    throw NewtonFailure(os.str(), index, nrm);
  }

  const ReducedBatteryModel& rom_;
  ReducedNonlinearity& nl_;
  double mu_;
  RomNewtonOptions opts_;
  OnlineCounters cnt_;
  Vector r_, r_trial_, r_best_, delta_, trial_, best_, a_c_old_;
  bool lu_valid_ = false;
  DenseMatrix J_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
  Eigen::PartialPivLU<DenseMatrix> lu_phi_;
};

ReducedTrajectory run(const ReducedBatteryModel& rom, ReducedNonlinearity& nl, double mu,
                      const Vector& a_c0, double dt, double t_end, const RomNewtonOptions& opts) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw DomainError("rom_simulate: dt and T must be positive");
  if (a_c0.size() != rom.k_c()) throw DimensionMismatch("rom_simulate: a_c0 length");
  const auto start = std::chrono::steady_clock::now();
  const auto n_steps = static_cast<Index>(std::llround(t_end / dt));

  ReducedTrajectory rt;
  rt.mu = mu;
  rt.dt = dt;
  rt.times.reserve(static_cast<std::size_t>(n_steps) + 1);
  rt.coefficients.reserve(static_cast<std::size_t>(n_steps) + 1);

  ReducedSolver solver(rom, nl, mu, opts);
  Vector a(rom.size());
  a << a_c0, rom.phi_start;
  solver.solve_potential(a);
  rt.times.push_back(0.0);
  rt.coefficients.push_back(a);
  for (Index step = 1; step <= n_steps; ++step) {
    solver.step(a, dt, static_cast<int>(step));
    rt.times.push_back(static_cast<double>(step) * dt);
    rt.coefficients.push_back(a);
  }
  rt.counters = solver.counters();
  rt.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rt;
}

}  // namespace

ReducedTrajectory rom_simulate(const ReducedBatteryModel& rom, double mu, const Vector& a_c0,
                               double dt, double t_end, const RomNewtonOptions& opts) {
  InterpolatedNonlinearity nl(rom);
  return run(rom, nl, mu, a_c0, dt, t_end, opts);
}

ReducedTrajectory rom_simulate_exact(const ReducedBatteryModel& rom, const OperatorDecomposition& d,
                                     double mu, const Vector& a_c0, double dt, double t_end,
                                     const RomNewtonOptions& opts) {
  if (rom.basis_c.dim() != d.layout.n_c || rom.basis_phi.dim() != d.layout.n_phi) {
    throw DimensionMismatch("rom_simulate_exact: model and decomposition differ");
  }
  ExactNonlinearity nl(rom, d);
  return run(rom, nl, mu, a_c0, dt, t_end, opts);
}

Trajectory reconstruct(const ReducedBatteryModel& rom, const ReducedTrajectory& rt) {
  Trajectory t;
  t.mu = rt.mu;
  t.dt = rt.dt;
  const Index n = rt.n_states();
  t.times.resize(n);
  t.c.resize(rom.basis_c.dim(), n);
  t.phi.resize(rom.basis_phi.dim(), n);
  for (Index s = 0; s < n; ++s) {
    const Vector& a = rt.coefficients[static_cast<std::size_t>(s)];
    if (a.size() != rom.size()) throw DimensionMismatch("reconstruct: coefficient length");
    t.times[s] = rt.times[static_cast<std::size_t>(s)];
    t.c.col(s) = rom.basis_c.modes * a.head(rom.k_c());
    t.phi.col(s) = rom.basis_phi.modes * a.tail(rom.k_phi());
  }
  t.wall_seconds = rt.wall_seconds;
  return t;
}

double relative_reduction_error(const std::vector<Trajectory>& fom,
                                const std::vector<Trajectory>& rom, Field field) {
  if (fom.size() != rom.size() || fom.empty()) {
    throw DimensionMismatch("relative_reduction_error: trajectory sets differ in size");
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < fom.size(); ++p) {
    const DenseMatrix& u = field == Field::Concentration ? fom[p].c : fom[p].phi;
    const DenseMatrix& v = field == Field::Concentration ? rom[p].c : rom[p].phi;
    if (u.rows() != v.rows() || u.cols() != v.cols()) {
      throw DimensionMismatch("relative_reduction_error: time grids or fields differ");
    }
    double num = 0.0;
    double den = 0.0;
    for (Index t = 0; t < u.cols(); ++t) {
      num = std::max(num, (u.col(t) - v.col(t)).norm());
      den = std::max(den, u.col(t).norm());
    }
    const double e = den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    worst = std::max(worst, e);
  }
  return worst;
}

}  // namespace porerom
