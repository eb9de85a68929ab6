#pragma once

#include "porerom/kinetics.hpp"
#include "porerom/linalg.hpp"

#include <array>
#include <span>
#include <vector>

namespace porerom {

enum class TermKind : std::uint8_t {
  // kappa_D (A/h) * 0.5 (1/c_a + 1/c_b) (c_b - c_a) into phi_a, negated into phi_b.
  // sources {c_a, c_b}, outputs {phi_a, phi_b}
  LogConcentration,
  // Butler-Volmer exchange over one interface face.
  // sources {c_s, c_e, phi_s, phi_e}, outputs {c_s, c_e, phi_s, phi_e}
  // with values {+N A, -N A, +j A, -j A}
  ButlerVolmer,
};

struct NonlinearTerm {
  std::array<Index, 4> src{-1, -1, -1, -1};
  std::array<Index, 4> out{-1, -1, -1, -1};
  double coeff = 0.0;  // kappa_D A / h, or face area
  ElectrodeSide side = ElectrodeSide::Neg;
};

struct EvalStats {
  std::size_t clamped = 0;
  double max_abs_argument = 0.0;
};

// Localized evaluation of a nonlinear operator at a few output DOFs from the
// values of the source DOFs they depend on. All buffers are sized at
// construction, evaluation does not allocate.
class RestrictedEvaluator {
 public:
  RestrictedEvaluator() = default;

  const std::vector<Index>& outputs() const { return outputs_; }
  const std::vector<Index>& source_dofs() const { return sources_; }
  std::size_t jacobian_nonzeros() const { return jac_rows_.size(); }
  const std::vector<int>& jacobian_rows() const { return jac_rows_; }
  const std::vector<int>& jacobian_cols() const { return jac_cols_; }

  // out[m] = operator value at outputs()[m] given source values ordered as
  // source_dofs(). With `jac`, also fills d out / d source in the order of
  // jacobian_rows()/jacobian_cols() (entries may repeat, they add up).
  void evaluate(std::span<const double> source_values, std::span<double> out,
                std::span<double> jac = {}, EvalStats* stats = nullptr) const;

  // Largest first-order change of a Butler-Volmer sinh argument when the
  // source values move by `source_step`. Zero for the other term kind.
  double max_argument_change(std::span<const double> source_values,
                             std::span<const double> source_step) const;

  // Scratch owned by one caller for repeated evaluation. With it every term
  // is evaluated once per call and scattered to its outputs, and
  // Butler-Volmer terms keep their OCP slope.
  struct Workspace {
    std::vector<double> ocp_slope;  // one per term
  };
  Workspace workspace() const;
  void evaluate(std::span<const double> source_values, std::span<double> out, std::span<double> jac,
                Workspace& ws) const;
  // As above, at the source values of the last evaluate() with `ws`.
  double max_argument_change(const Workspace& ws, std::span<const double> source_step) const;

 private:
  friend class NonlinearOperator;
  struct Contribution {
    int term;
    int slot;
  };
  TermKind kind_ = TermKind::LogConcentration;
  PhysicalConstants constants_;
  std::vector<Index> outputs_;
  std::vector<Index> sources_;
  std::vector<NonlinearTerm> terms_;  // src holds local source positions
  std::vector<int> contrib_offsets_;  // per output, CSR into contribs_
  std::vector<Contribution> contribs_;
  std::vector<int> jac_rows_;
  std::vector<int> jac_cols_;
  // per term, CSR into scatter_: where its slots go in out and jac
  struct Scatter {
    int output;
    int slot;
    int jac_offset;
  };
  std::vector<int> scatter_offsets_;
  std::vector<Scatter> scatter_;
};

// A nonlinear operator made of face-local terms of one kind, acting on the
// global unknown vector [c; phi].
class NonlinearOperator {
 public:
  NonlinearOperator() = default;
  NonlinearOperator(TermKind kind, std::vector<NonlinearTerm> terms, Index n_dofs,
                    const PhysicalConstants& constants);

  TermKind kind() const { return kind_; }
  Index size() const { return n_; }
  const std::vector<NonlinearTerm>& terms() const { return terms_; }

  void add_apply(const Vector& x, Vector& out, EvalStats* stats = nullptr) const;
  Vector apply(const Vector& x, EvalStats* stats = nullptr) const;
  void add_jacobian(const Vector& x, std::vector<Triplet>& triplets) const;

  // Largest change of a Butler-Volmer sinh argument along `dx`, to first
  // order around `x`. Zero for the other term kind.
  double max_argument_change(const Vector& x, const Vector& dx) const;

  // Output DOFs that can be nonzero, ascending.
  const std::vector<Index>& support() const { return support_; }
  // Sorted source DOFs the value at `output` depends on (empty outside support).
  std::vector<Index> dependencies(Index output) const;
  // Largest dependency list length, the locality constant C.
  std::size_t max_dependencies() const;

  RestrictedEvaluator restrict_to(std::span<const Index> outputs) const;

 private:
  TermKind kind_ = TermKind::LogConcentration;
  std::vector<NonlinearTerm> terms_;
  Index n_ = 0;
  PhysicalConstants constants_;
  std::vector<Index> support_;
  // per output DOF: (term, slot) list in CSR form
  std::vector<int> by_output_offsets_;
  std::vector<std::pair<int, int>> by_output_;
};

}  // namespace porerom
