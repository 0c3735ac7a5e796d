#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rbx/counters.hpp"
#include "rbx/parameter.hpp"
#include "rbx/truth/linear_solver.hpp"

namespace rbx {

/// A(mu) = sum_q theta_q(mu) A_q,  f(mu) = g(mu) f,  s(mu) = l^T u(mu).
///
/// Op is either DenseMatrix or SparseMatrix. All members are immutable after
/// construction and may be shared across threads.
template <class Op>
struct AffineProblem {
  std::string name;
  ParameterBox box;
  std::function<Vector(const Parameter&)> theta;
  std::vector<Op> components;
  Vector rhs;
  // Scalar rhs coefficient g(mu). Empty means g = 1.
  std::function<double(const Parameter&)> rhs_theta;
  Vector output;

  Index n_terms() const { return static_cast<Index>(components.size()); }
  Index n_dof() const { return rhs.size(); }
  Index param_dim() const { return box.dim(); }
};

template <class Op>
Vector evaluate_theta(const AffineProblem<Op>& problem, const Parameter& mu) {
  problem.box.check(mu);
  Vector th = problem.theta(mu);
  if (th.size() != problem.n_terms())
    throw InvalidParameter("theta returned " + std::to_string(th.size()) + " coefficients, expected " +
                           std::to_string(problem.n_terms()));
  return th;
}

template <class Op>
double evaluate_rhs_theta(const AffineProblem<Op>& problem, const Parameter& mu) {
  return problem.rhs_theta ? problem.rhs_theta(mu) : 1.0;
}

/// sum_q theta_q(mu) A_q, materialized.
template <class Op>
Op assemble_operator(const AffineProblem<Op>& problem, const Parameter& mu) {
  const Vector th = evaluate_theta(problem, mu);
  bump(counters().truth_dim_ops);
  Op a = th[0] * problem.components[0];
  for (Index q = 1; q < problem.n_terms(); ++q) a += th[q] * problem.components[static_cast<std::size_t>(q)];
  if constexpr (is_sparse_v<Op>) a.makeCompressed();
  return a;
}

template <class Op>
Vector assemble_rhs(const AffineProblem<Op>& problem, const Parameter& mu) {
  return evaluate_rhs_theta(problem, mu) * problem.rhs;
}

}  // namespace rbx
