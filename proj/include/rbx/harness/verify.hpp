#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rbx/greedy.hpp"
#include "rbx/pivoted_cholesky.hpp"
#include "rbx/smm.hpp"
#include "rbx/truth/diffusion2d.hpp"
#include "rbx/truth/thermal_block.hpp"

namespace rbx::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace oracle {

inline Parameter random_parameter(const ParameterBox& box, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Parameter mu(box.dim());
  for (Index d = 0; d < box.dim(); ++d) mu[d] = box.lower[d] + u(gen) * (box.upper[d] - box.lower[d]);
  return mu;
}

/// Basis from truth solves at random parameters; dependent snapshots are skipped.
template <class Op>
ReducedModel<Op> random_basis(const TruthModel<Op>& truth, Index n, std::mt19937_64& gen) {
  ReducedModel<Op> model(truth);
  for (int tries = 0; model.size() < n && tries < 10 * n; ++tries) {
    try {
      model.extend(truth_solve(truth, random_parameter(truth.problem.box, gen)));
    } catch (const BasisRejection&) {
    }
  }
  if (model.size() < n) throw NumericalFailure("could not build a random basis of the requested size");
  return model;
}

/// |r_N(mu)|^2_{X'} computed in the truth space: r^T X^{-1} r.
template <class Op>
double direct_residual_sq(const ReducedModel<Op>& model, const Parameter& mu, const ReducedSolution& sol) {
  const auto& t = model.truth();
  const Vector u = model.basis() * sol.coeffs;
  const Vector r = evaluate_rhs_theta(t.problem, mu) * t.problem.rhs - assemble_operator(t.problem, mu) * u;
  return r.dot(t.disc.riesz_solve(r));
}

/// Pivot order of greedy Schur-complement diagonal selection, recomputing the
/// full Schur complement at every step.
inline std::vector<Index> brute_force_pivots(const DenseMatrix& g, std::size_t steps, double drop_tol) {
  DenseMatrix s = g;
  std::vector<Index> piv;
  std::vector<bool> used(static_cast<std::size_t>(g.rows()), false);
  for (std::size_t k = 0; k < steps && k < static_cast<std::size_t>(g.rows()); ++k) {
    Index p = -1;
    for (Index i = 0; i < g.rows(); ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      if (p < 0 || s(i, i) > s(p, p)) p = i;
    }
    if (p < 0 || s(p, p) <= drop_tol) break;
    piv.push_back(p);
    used[static_cast<std::size_t>(p)] = true;
    const Vector c = s.col(p) / std::sqrt(s(p, p));
    s -= c * c.transpose();
  }
  return piv;
}

inline DenseMatrix random_psd(Index n, Index rank, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  DenseMatrix b(n, rank);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rank; ++j) b(i, j) = nd(gen);
  return b * b.transpose();
}

}  // namespace oracle

/// Online residual norm vs the truth-space Riesz computation for random
/// (mu, N <= n_max) pairs.
template <class Op>
CheckResult check_residual_equivalence(const TruthModel<Op>& truth, int pairs, Index n_max, std::uint64_t seed,
                                       double tol = 1e-6) {
  std::mt19937_64 gen(seed);
  const ReducedModel<Op> full = oracle::random_basis(truth, n_max, gen);
  std::uniform_int_distribution<Index> pick_n(1, n_max);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const ReducedModel<Op> model = full.truncated(pick_n(gen));
    const Parameter mu = oracle::random_parameter(truth.problem.box, gen);
    const ReducedSolution sol = reduced_solve(model, mu);
    const double online = residual_dual_norm_sq(model, mu, sol);
    const double direct = oracle::direct_residual_sq(model, mu, sol);
    worst = std::max(worst, std::abs(online - direct) / std::max(direct, 1e-300));
  }
  std::ostringstream os;
  os << pairs << " pairs on " << truth.problem.name << ", worst relative error " << worst;
  return {"residual equivalence (" + truth.problem.name + ")", worst <= tol, os.str()};
}

/// Delta_N(mu) >= |u(mu) - u_N(mu)|_X for random mu.
template <class Op>
CheckResult check_bound_certification(const TruthModel<Op>& truth, const std::vector<Index>& sizes, int samples,
                                      std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Index n_max = *std::max_element(sizes.begin(), sizes.end());
  const ReducedModel<Op> full = oracle::random_basis(truth, n_max, gen);
  std::vector<Parameter> mus;
  std::vector<Vector> truths;
  for (int k = 0; k < samples; ++k) {
    mus.push_back(oracle::random_parameter(truth.problem.box, gen));
    truths.push_back(truth_solve(truth, mus.back()).coefficients);
  }
  int violations = 0;
  double min_eff = std::numeric_limits<double>::infinity();
  for (Index n : sizes) {
    const ReducedModel<Op> model = full.truncated(n);
    for (int k = 0; k < samples; ++k) {
      const auto& mu = mus[static_cast<std::size_t>(k)];
      const double delta = error_estimate(model, mu);
      const Vector e = truths[static_cast<std::size_t>(k)] - reconstruct(model, reduced_solve(model, mu));
      const double err = truth.disc.x_norm(e);
      if (delta < err) ++violations;
      if (err > 0.0) min_eff = std::min(min_eff, delta / err);
    }
  }
  std::ostringstream os;
  os << samples << " parameters x " << sizes.size() << " basis sizes, " << violations
     << " violations, smallest effectivity " << min_eff;
  return {"certified bound (" + truth.problem.name + ")", violations == 0, os.str()};
}

/// Delta_N(mu^j) <= rel * Delta_0(mu^j) at every snapshot parameter.
template <class Op>
CheckResult check_reproduction(const TruthModel<Op>& truth, Index n, std::uint64_t seed, double rel = 1e-8) {
  std::mt19937_64 gen(seed);
  const ReducedModel<Op> model = oracle::random_basis(truth, n, gen);
  const ReducedModel<Op> empty(truth);
  double worst = 0.0;
  for (Index j = 0; j < model.size(); ++j) {
    const Parameter mu = model.snapshot_params().col(j);
    worst = std::max(worst, error_estimate(model, mu) / error_estimate(empty, mu));
  }
  std::ostringstream os;
  os << model.size() << " snapshots on " << truth.problem.name << ", worst Delta_N/Delta_0 " << worst;
  return {"reproduction (" + truth.problem.name + ")", worst <= rel, os.str()};
}

/// Pivot order vs brute-force Schur selection and reconstruction of the full
/// factorization on random PSD matrices.
inline CheckResult check_pivoted_cholesky(int matrices, Index max_size, std::uint64_t seed, double tol = 1e-10) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<Index> size(2, max_size);
  int order_mismatch = 0;
  double worst = 0.0;
  for (int k = 0; k < matrices; ++k) {
    const Index n = size(gen);
    const Index rank = std::uniform_int_distribution<Index>(1, n)(gen);
    const DenseMatrix g = oracle::random_psd(n, rank, gen);
    const double drop = 1e-12 * g.diagonal().maxCoeff();
    const PivotedCholeskyResult r = pivoted_cholesky(g, static_cast<std::size_t>(n), drop);
    if (r.pivots != oracle::brute_force_pivots(g, static_cast<std::size_t>(n), drop)) ++order_mismatch;
    worst = std::max(worst, (r.factor * r.factor.transpose() - g).norm());
  }
  std::ostringstream os;
  os << matrices << " matrices, " << order_mismatch << " pivot-order mismatches, worst reconstruction " << worst;
  return {"pivoted Cholesky", order_mismatch == 0 && worst <= tol, os.str()};
}

/// |Xi_sur| <= M, distinct positions, and every level's choice is the
/// constrained argmin (smallest delta >= level, ties to the lowest position).
inline CheckResult check_smm_property(int arrays, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  int failures = 0;
  for (int k = 0; k < arrays; ++k) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 60)(gen);
    const auto budget = std::uniform_int_distribution<std::size_t>(1, 15)(gen);
    std::vector<double> delta(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Coarse values so that ties occur.
    const bool coarse = k % 3 == 0;
    for (auto& d : delta) d = coarse ? std::round(u(gen) * 8.0) / 8.0 : u(gen);
    const double tol = u(gen) * 0.5;
    const SurrogateDomain s = smm_construct(delta, tol, budget);
    const double dmax = *std::max_element(delta.begin(), delta.end());

    std::vector<std::size_t> expect;
    if (dmax > tol)
      for (std::size_t m = 0; m < budget; ++m) {
        const double nu = tol + (dmax - tol) * static_cast<double>(m) / static_cast<double>(budget);
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i)
          if (delta[i] >= nu && (best == n || delta[i] < delta[best])) best = i;
        if (best != n && std::find(expect.begin(), expect.end(), best) == expect.end()) expect.push_back(best);
      }
    const bool ok = s.indices.size() <= budget && s.indices == expect;
    if (!ok) ++failures;
  }
  std::ostringstream os;
  os << arrays << " random arrays, " << failures << " failures";
  return {"SMM construction", failures == 0, os.str()};
}

/// The oracle suites at desk scale; `quick` shrinks every count.
inline std::vector<CheckResult> run_verification(bool quick, std::uint64_t seed = 7) {
  std::vector<CheckResult> out;
  const auto p1 = build_diffusion2d(quick ? 15 : 35);
  const auto p2 = build_thermal_block(quick ? 10 : 19);
  const int pairs = quick ? 10 : 50;
  out.push_back(check_residual_equivalence(p1, pairs, 10, seed));
  out.push_back(check_residual_equivalence(p2, pairs, 10, seed + 1));
  out.push_back(check_pivoted_cholesky(quick ? 5 : 20, 30, seed + 2));
  out.push_back(check_smm_property(quick ? 50 : 200, seed + 3));
  out.push_back(check_bound_certification(p2, {2, 5, 10}, quick ? 20 : 100, seed + 4));
  out.push_back(check_reproduction(p1, 10, seed + 5));
  out.push_back(check_reproduction(p2, 10, seed + 6));
  return out;
}

}  // namespace rbx::harness
