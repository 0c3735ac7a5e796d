#pragma once

#include <memory>

#include "rbx/affine_problem.hpp"
#include "rbx/coercivity.hpp"
#include "rbx/truth/discretization.hpp"
#include "rbx/truth/linear_solver.hpp"

namespace rbx {

/// An affine problem bundled with its truth discretization and the
/// coercivity strategy used by the error estimator.
template <class Op>
struct TruthModel {
  AffineProblem<Op> problem;
  TruthDiscretization<Op> disc;
  CoercivityStrategy coercivity;

  Index n_dof() const { return disc.n_dof(); }
};

struct TruthSolution {
  Vector coefficients;
  Parameter mu;
};

/// Relative residual tolerance for direct truth solves.
inline constexpr double kTruthResidualTol = 1e-10;

template <class Op>
double coercivity_lower_bound(const TruthModel<Op>& truth, const Parameter& mu) {
  return coercivity_lower_bound(truth.problem, truth.disc, truth.coercivity, mu);
}

/// Direct solve of A(mu) u = f(mu). Optionally hands back the factorization
/// so callers can cache it.
template <class Op>
TruthSolution truth_solve(const TruthModel<Op>& truth, const Parameter& mu,
                          std::shared_ptr<const LuFactorization<Op>>* factorization_out = nullptr) {
  const Op a = assemble_operator(truth.problem, mu);
  const Vector f = assemble_rhs(truth.problem, mu);
  auto lu = std::make_shared<const LuFactorization<Op>>(a);
  bump(counters().truth_solves);
  bump(counters().truth_dim_ops);
  Vector u = lu->solve_vector(f);

  const double fnorm = f.norm();
  Vector r = f - a * u;
  if (r.norm() > kTruthResidualTol * fnorm) {
    // One step of iterative refinement.
    u += lu->solve_vector(r);
    r = f - a * u;
    if (r.norm() > kTruthResidualTol * fnorm)
      throw NumericalFailure("truth solve residual " + std::to_string(r.norm() / fnorm) + " above tolerance",
                             lu->rcond());
  }
  if (factorization_out) *factorization_out = std::move(lu);
  return {std::move(u), mu};
}

}  // namespace rbx
