#include "porerom/face_operator.hpp"

#include "porerom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace porerom {

namespace {

int source_count(TermKind kind) { return kind == TermKind::LogConcentration ? 2 : 4; }
int output_count(TermKind kind) { return kind == TermKind::LogConcentration ? 2 : 4; }

// Evaluates one term from its source values. values[slot] is the contribution
// to out[slot]; deriv[slot][s] = d values[slot] / d src[s] when requested.
void eval_term(TermKind kind, const NonlinearTerm& t, const double* src, double* values,
               double (*deriv)[4], const PhysicalConstants& k, EvalStats* stats,
               double* ocp_slope = nullptr) {
  if (kind == TermKind::LogConcentration) {
    const double ca = src[0];
    const double cb = src[1];
    if (!(ca >= kConcentrationFloor) || !(cb >= kConcentrationFloor)) {
      std::ostringstream os;
      os << "electrolyte concentration below floor (" << ca << ", " << cb << ")";
      throw DomainError(os.str());
    }
    const double half = 0.5 * t.coeff;
    const double g = half * (cb / ca - ca / cb);
    values[0] = g;
    values[1] = -g;
    if (deriv) {
      const double dga = half * (-cb / (ca * ca) - 1.0 / cb);
      const double dgb = half * (1.0 / ca + ca / (cb * cb));
      deriv[0][0] = dga;
      deriv[0][1] = dgb;
      deriv[1][0] = -dga;
      deriv[1][1] = -dgb;
    }
    return;
  }
  // src = {c_s, c_e, phi_s, phi_e}
  const auto bv = butler_volmer(src[1], src[0], src[3], src[2], t.side, k);
  if (stats) {
    if (bv.clamped) ++stats->clamped;
    const double arg =
        std::abs(butler_volmer_argument(src[0], src[3], src[2], t.side, k));
    stats->max_abs_argument = std::max(stats->max_abs_argument, arg);
  }
  if (ocp_slope) *ocp_slope = bv.du0_dcs;
  const double a = t.coeff;
  values[0] = bv.N * a;
  values[1] = -bv.N * a;
  values[2] = bv.j * a;
  values[3] = -bv.j * a;
  if (deriv) {
    // d j / d (c_s, c_e, phi_s, phi_e)
    const double dj[4] = {bv.dj_dcs, bv.dj_dce, bv.dj_dphis, bv.dj_dphie};
    for (int s = 0; s < 4; ++s) {
      deriv[0][s] = dj[s] * a / k.F;
      deriv[1][s] = -dj[s] * a / k.F;
      deriv[2][s] = dj[s] * a;
      deriv[3][s] = -dj[s] * a;
    }
  }
}

// First-order change of the sinh argument of one Butler-Volmer term.
double argument_change(const NonlinearTerm& t, const PhysicalConstants& k, double c_s, double dc_s,
                       double dphi_s, double dphi_e) {
  const double c_max = k.c_max(t.side);
  const double s = c_s / c_max;
  if (!(s > 0.0 && s < 1.0)) return 0.0;
  const double du = open_circuit_potential(s, t.side).derivative / c_max * dc_s;
  return std::abs(k.sinh_scale() * (dphi_s - dphi_e - du));
}

}  // namespace

NonlinearOperator::NonlinearOperator(TermKind kind, std::vector<NonlinearTerm> terms, Index n_dofs,
                                     const PhysicalConstants& constants)
    : kind_(kind), terms_(std::move(terms)), n_(n_dofs), constants_(constants) {
  const int n_out = output_count(kind_);
  std::vector<int> counts(static_cast<std::size_t>(n_) + 1, 0);
  for (const auto& t : terms_) {
    for (int s = 0; s < n_out; ++s) {
      if (t.out[s] < 0 || t.out[s] >= n_) throw DimensionMismatch("term output out of range");
      ++counts[static_cast<std::size_t>(t.out[s]) + 1];
    }
    for (int s = 0; s < source_count(kind_); ++s) {
      if (t.src[s] < 0 || t.src[s] >= n_) throw DimensionMismatch("term source out of range");
    }
  }
  by_output_offsets_.assign(counts.size(), 0);
  for (std::size_t i = 1; i < counts.size(); ++i) {
    by_output_offsets_[i] = by_output_offsets_[i - 1] + counts[i];
    if (counts[i] > 0) support_.push_back(static_cast<Index>(i - 1));
  }
  by_output_.resize(static_cast<std::size_t>(by_output_offsets_.back()));
  std::vector<int> fill(by_output_offsets_.begin(), by_output_offsets_.end() - 1);
  for (int ti = 0; ti < static_cast<int>(terms_.size()); ++ti) {
    for (int s = 0; s < n_out; ++s) {
      const auto o = static_cast<std::size_t>(terms_[static_cast<std::size_t>(ti)].out[s]);
      by_output_[static_cast<std::size_t>(fill[o]++)] = {ti, s};
    }
  }
}

void NonlinearOperator::add_apply(const Vector& x, Vector& out, EvalStats* stats) const {
  if (x.size() != n_ || out.size() != n_) throw DimensionMismatch("NonlinearOperator::apply");
  const int n_src = source_count(kind_);
  const int n_out = output_count(kind_);
  double src[4];
  double values[4];
  for (const auto& t : terms_) {
    for (int s = 0; s < n_src; ++s) src[s] = x[t.src[s]];
    eval_term(kind_, t, src, values, nullptr, constants_, stats);
    for (int s = 0; s < n_out; ++s) out[t.out[s]] += values[s];
  }
}

Vector NonlinearOperator::apply(const Vector& x, EvalStats* stats) const {
  Vector out = Vector::Zero(n_);
  add_apply(x, out, stats);
  return out;
}

void NonlinearOperator::add_jacobian(const Vector& x, std::vector<Triplet>& triplets) const {
  const int n_src = source_count(kind_);
  const int n_out = output_count(kind_);
  double src[4];
  double values[4];
  double deriv[4][4];
  for (const auto& t : terms_) {
    for (int s = 0; s < n_src; ++s) src[s] = x[t.src[s]];
    eval_term(kind_, t, src, values, deriv, constants_, nullptr);
    for (int o = 0; o < n_out; ++o) {
      for (int s = 0; s < n_src; ++s) triplets.emplace_back(t.out[o], t.src[s], deriv[o][s]);
    }
  }
}

double NonlinearOperator::max_argument_change(const Vector& x, const Vector& dx) const {
  if (kind_ != TermKind::ButlerVolmer) return 0.0;
  double worst = 0.0;
  for (const auto& t : terms_) {
    const double a = argument_change(t, constants_, x[t.src[0]], dx[t.src[0]], dx[t.src[2]],
                                     dx[t.src[3]]);
    worst = std::max(worst, a);
  }
  return worst;
}

std::vector<Index> NonlinearOperator::dependencies(Index output) const {
  std::vector<Index> deps;
  if (output < 0 || output >= n_) return deps;
  const int n_src = source_count(kind_);
  for (int p = by_output_offsets_[static_cast<std::size_t>(output)];
       p < by_output_offsets_[static_cast<std::size_t>(output) + 1]; ++p) {
    const auto& t = terms_[static_cast<std::size_t>(by_output_[static_cast<std::size_t>(p)].first)];
    for (int s = 0; s < n_src; ++s) deps.push_back(t.src[s]);
  }
  std::sort(deps.begin(), deps.end());
  deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
  return deps;
}

std::size_t NonlinearOperator::max_dependencies() const {
  std::size_t m = 0;
  for (Index o : support_) m = std::max(m, dependencies(o).size());
  return m;
}

RestrictedEvaluator NonlinearOperator::restrict_to(std::span<const Index> outputs) const {
  RestrictedEvaluator r;
  r.kind_ = kind_;
  r.constants_ = constants_;
  r.outputs_.assign(outputs.begin(), outputs.end());

  std::vector<int> used_terms;
  for (Index o : outputs) {
    if (o < 0 || o >= n_) throw DimensionMismatch("restrict_to: output out of range");
    for (int p = by_output_offsets_[static_cast<std::size_t>(o)];
         p < by_output_offsets_[static_cast<std::size_t>(o) + 1]; ++p) {
      used_terms.push_back(by_output_[static_cast<std::size_t>(p)].first);
    }
  }
  std::sort(used_terms.begin(), used_terms.end());
  used_terms.erase(std::unique(used_terms.begin(), used_terms.end()), used_terms.end());

  const int n_src = source_count(kind_);
  for (int ti : used_terms) {
    const auto& t = terms_[static_cast<std::size_t>(ti)];
    for (int s = 0; s < n_src; ++s) r.sources_.push_back(t.src[s]);
  }
  std::sort(r.sources_.begin(), r.sources_.end());
  r.sources_.erase(std::unique(r.sources_.begin(), r.sources_.end()), r.sources_.end());
  auto local_src = [&](Index global) {
    return static_cast<Index>(std::lower_bound(r.sources_.begin(), r.sources_.end(), global) -
                              r.sources_.begin());
  };

  std::vector<int> term_local(terms_.size(), -1);
  for (int ti : used_terms) {
    NonlinearTerm t = terms_[static_cast<std::size_t>(ti)];
    for (int s = 0; s < n_src; ++s) t.src[s] = local_src(t.src[s]);
    term_local[static_cast<std::size_t>(ti)] = static_cast<int>(r.terms_.size());
    r.terms_.push_back(t);
  }

  r.contrib_offsets_.push_back(0);
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    const Index o = outputs[m];
    for (int p = by_output_offsets_[static_cast<std::size_t>(o)];
         p < by_output_offsets_[static_cast<std::size_t>(o) + 1]; ++p) {
      const auto [ti, slot] = by_output_[static_cast<std::size_t>(p)];
      r.contribs_.push_back({term_local[static_cast<std::size_t>(ti)], slot});
      const auto& lt = r.terms_[static_cast<std::size_t>(term_local[static_cast<std::size_t>(ti)])];
      for (int s = 0; s < n_src; ++s) {
        r.jac_rows_.push_back(static_cast<int>(m));
        r.jac_cols_.push_back(static_cast<int>(lt.src[s]));
      }
    }
    r.contrib_offsets_.push_back(static_cast<int>(r.contribs_.size()));
  }

  r.scatter_offsets_.assign(r.terms_.size() + 1, 0);
  for (const auto& c : r.contribs_) ++r.scatter_offsets_[static_cast<std::size_t>(c.term) + 1];
  for (std::size_t i = 1; i < r.scatter_offsets_.size(); ++i) r.scatter_offsets_[i] += r.scatter_offsets_[i - 1];
  r.scatter_.resize(r.contribs_.size());
  std::vector<int> next(r.scatter_offsets_.begin(), r.scatter_offsets_.end() - 1);
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    for (int p = r.contrib_offsets_[m]; p < r.contrib_offsets_[m + 1]; ++p) {
      const auto& c = r.contribs_[static_cast<std::size_t>(p)];
      r.scatter_[static_cast<std::size_t>(next[static_cast<std::size_t>(c.term)]++)] = {static_cast<int>(m), c.slot,
                                                                                     p * n_src};
    }
  }
  return r;
}

void RestrictedEvaluator::evaluate(std::span<const double> source_values, std::span<double> out,
                                   std::span<double> jac, EvalStats* stats) const {
  if (source_values.size() != sources_.size() || out.size() != outputs_.size()) {
    throw DimensionMismatch("RestrictedEvaluator::evaluate");
  }
  const bool want_jac = !jac.empty();
  if (want_jac && jac.size() != jac_rows_.size()) throw DimensionMismatch("restricted jacobian size");
  const int n_src = source_count(kind_);
  double src[4];
  double values[4];
  double deriv[4][4];
  std::size_t jp = 0;
  for (std::size_t m = 0; m < outputs_.size(); ++m) {
    double acc = 0.0;
    for (int p = contrib_offsets_[m]; p < contrib_offsets_[m + 1]; ++p) {
      const auto& c = contribs_[static_cast<std::size_t>(p)];
      const auto& t = terms_[static_cast<std::size_t>(c.term)];
      for (int s = 0; s < n_src; ++s) src[s] = source_values[static_cast<std::size_t>(t.src[s])];
      eval_term(kind_, t, src, values, want_jac ? deriv : nullptr, constants_, stats);
      acc += values[c.slot];
      if (want_jac) {
        for (int s = 0; s < n_src; ++s) jac[jp++] = deriv[c.slot][s];
      }
    }
    out[m] = acc;
  }
}

double RestrictedEvaluator::max_argument_change(std::span<const double> source_values,
                                                std::span<const double> source_step) const {
  if (kind_ != TermKind::ButlerVolmer) return 0.0;
  if (source_values.size() != sources_.size() || source_step.size() != sources_.size()) {
    throw DimensionMismatch("RestrictedEvaluator::max_argument_change");
  }
  double worst = 0.0;
  for (const auto& t : terms_) {
    const auto at = [&](int s) { return static_cast<std::size_t>(t.src[s]); };
    worst = std::max(worst, argument_change(t, constants_, source_values[at(0)],
                                            source_step[at(0)], source_step[at(2)],
                                            source_step[at(3)]));
  }
  return worst;
}

RestrictedEvaluator::Workspace RestrictedEvaluator::workspace() const {
  Workspace ws;
  ws.ocp_slope.resize(terms_.size());
  return ws;
}

void RestrictedEvaluator::evaluate(std::span<const double> source_values, std::span<double> out,
                                   std::span<double> jac, Workspace& ws) const {
  if (source_values.size() != sources_.size() || out.size() != outputs_.size()) {
    throw DimensionMismatch("RestrictedEvaluator::evaluate");
  }
  if (ws.ocp_slope.size() != terms_.size()) throw DimensionMismatch("RestrictedEvaluator workspace");
  const bool want_jac = !jac.empty();
  if (want_jac && jac.size() != jac_rows_.size()) throw DimensionMismatch("restricted jacobian size");
  const int n_src = source_count(kind_);
  double src[4];
  double values[4];
  double deriv[4][4];
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t ti = 0; ti < terms_.size(); ++ti) {
    const auto& t = terms_[ti];
    for (int s = 0; s < n_src; ++s) src[s] = source_values[static_cast<std::size_t>(t.src[s])];
    eval_term(kind_, t, src, values, want_jac ? deriv : nullptr, constants_, nullptr, &ws.ocp_slope[ti]);
    for (int e = scatter_offsets_[ti]; e < scatter_offsets_[ti + 1]; ++e) {
      const auto& sc = scatter_[static_cast<std::size_t>(e)];
      out[static_cast<std::size_t>(sc.output)] += values[sc.slot];
      if (want_jac) {
        for (int s = 0; s < n_src; ++s) jac[static_cast<std::size_t>(sc.jac_offset + s)] = deriv[sc.slot][s];
      }
    }
  }
}

double RestrictedEvaluator::max_argument_change(const Workspace& ws, std::span<const double> source_step) const {
  if (kind_ != TermKind::ButlerVolmer) return 0.0;
  if (source_step.size() != sources_.size() || ws.ocp_slope.size() != terms_.size()) {
    throw DimensionMismatch("RestrictedEvaluator::max_argument_change");
  }
  const double scale = constants_.sinh_scale();
  double worst = 0.0;
  for (std::size_t ti = 0; ti < terms_.size(); ++ti) {
    const auto& t = terms_[ti];
    const auto at = [&](int s) { return source_step[static_cast<std::size_t>(t.src[s])]; };
    worst = std::max(worst, std::abs(scale * (at(2) - at(3) - ws.ocp_slope[ti] * at(0))));
  }
  return worst;
}

}  // namespace porerom
