#pragma once

#include <Eigen/Eigenvalues>

#include <variant>

#include "rbx/affine_problem.hpp"
#include "rbx/truth/discretization.hpp"

namespace rbx {

/// alpha_LB(mu) = min_q theta_q(mu)/theta_q(anchor) * alpha(anchor).
/// Valid for parametrically coercive problems with positive theta and
/// positive semidefinite components.
struct MinThetaBound {
  Parameter anchor;
  double alpha_anchor = 0.0;
};

/// A fixed value. Not a rigorous bound in general.
struct ConstantBound {
  double value = 1.0;
};

/// Exact discrete coercivity constant by a dense generalized eigensolve of
/// (sym A(mu), X) at every call. Truth-dimension cost; for testing.
struct EigenBound {};

using CoercivityStrategy = std::variant<MinThetaBound, ConstantBound, EigenBound>;

/// Smallest eigenvalue of sym(A) v = lambda X v.
template <class Op>
double smallest_generalized_eigenvalue(const Op& a, const Op& x) {
  bump(counters().truth_dim_ops);
  const DenseMatrix ad = DenseMatrix(a);
  const DenseMatrix sym = 0.5 * (ad + ad.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> es(sym, DenseMatrix(x), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("generalized eigensolve failed");
  return es.eigenvalues().minCoeff();
}

template <class Op>
double coercivity_lower_bound(const AffineProblem<Op>& problem, const TruthDiscretization<Op>& disc,
                              const CoercivityStrategy& strategy, const Parameter& mu) {
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantBound>) {
          problem.box.check(mu);
          return s.value;
        } else if constexpr (std::is_same_v<S, MinThetaBound>) {
          const Vector th = evaluate_theta(problem, mu);
          const Vector th_bar = problem.theta(s.anchor);
          if ((th.array() <= 0.0).any() || (th_bar.array() <= 0.0).any())
            throw StrategyInvalid("min-theta bound requires strictly positive theta coefficients");
          return (th.array() / th_bar.array()).minCoeff() * s.alpha_anchor;
        } else {
          return smallest_generalized_eigenvalue(assemble_operator(problem, mu), disc.x_inner());
        }
      },
      strategy);
}

/// Min-theta strategy anchored at mu_bar with its exact coercivity constant.
template <class Op>
MinThetaBound make_min_theta_bound(const AffineProblem<Op>& problem, const TruthDiscretization<Op>& disc,
                                   const Parameter& anchor) {
  return {anchor, smallest_generalized_eigenvalue(assemble_operator(problem, anchor), disc.x_inner())};
}

}  // namespace rbx
