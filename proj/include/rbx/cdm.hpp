#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <span>
#include <vector>

#include "rbx/counters.hpp"
#include "rbx/pivoted_cholesky.hpp"
#include "rbx/reduced_model.hpp"
#include "rbx/surrogate_domain.hpp"
#include "rbx/truth/linear_solver.hpp"

namespace rbx {

inline constexpr std::size_t kDefaultCdmQCap = 5;
inline constexpr std::size_t kDefaultMemoryCapBytes = std::size_t{1} << 30;

/// Cached inverses A(mu^m)^{-1} f and A(mu^m)^{-1} A_k xi_{m'} for the first
/// Q snapshots, grown incrementally with the basis.
template <class Op>
class CdmOfflineData {
 public:
  /// Brings the data in line with `model` using Q = min(q_cap, N). Only the
  /// basis columns added since the last call are solved for existing members.
  void update(const ReducedModel<Op>& model, std::size_t q_cap, const FactorizationCache<Op>* cache = nullptr) {
    const Index n = model.size();
    const Index qa = model.n_terms();
    if (n < 1) throw InvalidParameter("CDM offline data needs a nonempty basis");
    if (n < n_basis_) throw InvalidParameter("CDM offline data cannot shrink with the basis");
    const auto& applied = model.applied_terms();

    if (n > n_basis_) {
      const Index first = n_basis_ * qa;
      const Index cols = (n - n_basis_) * qa;
      for (std::size_t k = 0; k < members_.size(); ++k) {
        inv_components_[k].conservativeResize(applied.rows(), n * qa);
        inv_components_[k].rightCols(cols) = solve(*factors_[k], applied.middleCols(first, cols));
      }
    }
    n_basis_ = n;

    const auto q_target = static_cast<Index>(std::min<std::size_t>(q_cap, static_cast<std::size_t>(n)));
    for (Index m = q_considered_; m < q_target; ++m) {
      std::shared_ptr<const LuFactorization<Op>> lu = cache ? cache->find(static_cast<std::size_t>(m)) : nullptr;
      if (!lu) {
        try {
          lu = std::make_shared<const LuFactorization<Op>>(
              assemble_operator(model.truth().problem, Parameter(model.snapshot_params().col(m))));
        } catch (const NumericalFailure& e) {
          std::cerr << "warning: CDM drops snapshot " << m << ": " << e.what() << "\n";
          continue;
        }
      }
      const Vector f = model.truth().problem.rhs;
      inv_f_.conservativeResize(f.size(), static_cast<Index>(members_.size()) + 1);
      inv_f_.rightCols(1) = solve(*lu, f);
      inv_components_.push_back(solve(*lu, applied.leftCols(n * qa)));
      members_.push_back(m);
      factors_.push_back(std::move(lu));
    }
    q_considered_ = std::max(q_considered_, q_target);
  }

  /// Number of cached inverses actually in use.
  Index q_used() const { return static_cast<Index>(members_.size()); }
  /// Leading block size for the Q-dimensional reduced solve.
  Index q_block() const { return q_considered_; }
  Index n_basis() const { return n_basis_; }
  /// Snapshot positions m of the cached inverses.
  const std::vector<Index>& members() const { return members_; }
  /// Column k is A(mu^{members[k]})^{-1} f.
  const DenseMatrix& inv_f() const { return inv_f_; }
  /// Entry k: column m' * Q_a + q is A(mu^{members[k]})^{-1} A_q xi_{m'}.
  const std::vector<DenseMatrix>& inv_components() const { return inv_components_; }

  /// [inv_f | inv_components[0] | ... ], the matrix the online weights multiply.
  DenseMatrix stacked() const {
    Index cols = inv_f_.cols();
    for (const auto& b : inv_components_) cols += b.cols();
    DenseMatrix out(inv_f_.rows(), cols);
    out.leftCols(inv_f_.cols()) = inv_f_;
    Index at = inv_f_.cols();
    for (const auto& b : inv_components_) {
      out.middleCols(at, b.cols()) = b;
      at += b.cols();
    }
    return out;
  }

 private:
  template <class Rhs>
  static DenseMatrix solve(const LuFactorization<Op>& lu, const Rhs& rhs) {
    bump(counters().truth_solves, static_cast<std::uint64_t>(rhs.cols()));
    bump(counters().truth_dim_ops);
    return lu.solve(DenseMatrix(rhs));
  }

  Index n_basis_ = 0;
  Index q_considered_ = 0;
  std::vector<Index> members_;
  std::vector<std::shared_ptr<const LuFactorization<Op>>> factors_;
  DenseMatrix inv_f_;
  std::vector<DenseMatrix> inv_components_;
};

namespace detail {

/// Snapshot-basis weights of the Q-dimensional reduced solution: solve the
/// leading Q x Q system in the orthonormal basis, then map through R^{-1}.
template <class Op>
Vector cdm_inverse_weights(const ReducedModel<Op>& model, const CdmOfflineData<Op>& offline, const Vector& theta,
                           double g) {
  const Index q = offline.q_block();
  const Vector d = solve_reduced(model, theta, g, q);
  return model.snapshot_coords().topLeftCorner(q, q).template triangularView<Eigen::Upper>().solve(d);
}

/// Online weights w such that e~(mu) = offline.stacked() * w.
template <class Op>
Vector cdm_online_weights(const ReducedModel<Op>& model, const CdmOfflineData<Op>& offline, const Vector& theta,
                          double g, const Vector& coeffs_n) {
  const Vector s = cdm_inverse_weights(model, offline, theta, g);
  const Vector v = residual_weights(theta, coeffs_n);
  const auto& members = offline.members();
  const Index q = offline.q_used();
  Vector w(q + q * v.size());
  for (Index k = 0; k < q; ++k) {
    const double sk = s[members[static_cast<std::size_t>(k)]];
    w[k] = g * sk;
    w.segment(q + k * v.size(), v.size()) = -sk * v;
  }
  return w;
}

}  // namespace detail

/// Approximate error e~(mu) = (sum_m s_m(mu) A(mu^m)^{-1}) r(u_N(mu); mu).
template <class Op>
Vector cdm_approx_error(const ReducedModel<Op>& model, const CdmOfflineData<Op>& offline, const Parameter& mu) {
  if (offline.n_basis() != model.size()) throw InvalidParameter("CDM offline data is out of date with the model");
  const auto& problem = model.truth().problem;
  const Vector th = evaluate_theta(problem, mu);
  const double g = evaluate_rhs_theta(problem, mu);
  const Vector c = detail::solve_reduced(model, th, g, model.size());
  bump(counters().approx_error_evals);
  bump(counters().truth_dim_ops);
  return offline.stacked() * detail::cdm_online_weights(model, offline, th, g, c);
}

struct CdmOptions {
  std::size_t memory_cap_bytes = kDefaultMemoryCapBytes;
  std::size_t workers = 1;
};

struct CdmConstruction {
  SurrogateDomain domain;
  std::size_t admissible = 0;
  std::vector<double> pivot_diagonals;
  std::size_t psd_warnings = 0;
  bool streamed = false;
};

/// Normalized approximate errors over a parameter set in X geometry: column
/// k of `block` has unit Euclidean norm and Euclidean inner products equal to
/// the X inner products of the normalized e~. Points whose |e~|_X is at or
/// below max(1e-14, 1e-10 max|e~|_X) are dropped.
template <class Op>
class NormalizedErrorField {
 public:
  NormalizedErrorField(const ReducedModel<Op>& model, const CdmOfflineData<Op>& offline, const DenseMatrix& params,
                       std::span<const std::size_t> indices, const DenseMatrix* coeffs, const CdmOptions& opts)
      : opts_(opts) {
    if (offline.n_basis() != model.size()) throw InvalidParameter("CDM offline data is out of date with the model");
    const auto& problem = model.truth().problem;
    half_ = model.truth().disc.x_half_apply(offline.stacked());

    const auto count = static_cast<Index>(indices.size());
    weights_.resize(half_.cols(), 0);
    // Online weights, a small dense matrix of size cols x count. Kept only
    // when the truth-sized block does not fit the memory cap.
    DenseMatrix w(half_.cols(), count);
    parallel_chunks(indices.size(), opts.workers, [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t k = b; k < e; ++k) {
        const Parameter mu = params.col(static_cast<Index>(indices[k]));
        const Vector th = evaluate_theta(problem, mu);
        const double g = evaluate_rhs_theta(problem, mu);
        const Vector c = coeffs ? Vector(coeffs->col(static_cast<Index>(k))) : detail::solve_reduced(model, th, g, model.size());
        w.col(static_cast<Index>(k)) = detail::cdm_online_weights(model, offline, th, g, c);
      }
    });
    bump(counters().approx_error_evals, static_cast<std::uint64_t>(count));
    bump(counters().truth_dim_ops);

    Vector norms(count);
    const double block_bytes = 8.0 * static_cast<double>(half_.rows()) * static_cast<double>(count);
    streamed_ = block_bytes > static_cast<double>(opts.memory_cap_bytes);
    DenseMatrix full;
    if (!streamed_) {
      full = half_ * w;
      norms = full.colwise().norm();
    } else {
      for (Index b = 0; b < count; b += kChunk) {
        const Index nb = std::min(kChunk, count - b);
        norms.segment(b, nb) = (half_ * w.middleCols(b, nb)).colwise().norm();
      }
    }

    const double floor = std::max(1e-14, 1e-10 * (count > 0 ? norms.maxCoeff() : 0.0));
    for (Index k = 0; k < count; ++k)
      if (norms[k] > floor) admissible_.push_back(static_cast<std::size_t>(k));
    const auto na = static_cast<Index>(admissible_.size());
    if (!streamed_) {
      block_.resize(half_.rows(), na);
      for (Index a = 0; a < na; ++a) {
        const Index k = static_cast<Index>(admissible_[static_cast<std::size_t>(a)]);
        block_.col(a) = full.col(k) / norms[k];
      }
    } else {
      weights_.resize(half_.cols(), na);
      for (Index a = 0; a < na; ++a) {
        const Index k = static_cast<Index>(admissible_[static_cast<std::size_t>(a)]);
        weights_.col(a) = w.col(k) / norms[k];
      }
    }
  }

  /// Positions (into the input index list) of the admissible points.
  const std::vector<std::size_t>& admissible() const { return admissible_; }
  bool streamed() const { return streamed_; }

  /// Column j of the normalized Gramian over admissible points.
  Vector gramian_column(Index j) const {
    if (!streamed_) return block_.transpose() * block_.col(j);
    const Vector zj = half_ * weights_.col(j);
    const auto na = weights_.cols();
    Vector col(na);
    for (Index b = 0; b < na; b += kChunk) {
      const Index nb = std::min(kChunk, na - b);
      col.segment(b, nb) = (half_ * weights_.middleCols(b, nb)).transpose() * zj;
    }
    return col;
  }

  /// Normalized error block (admissible points only). Materialized on demand
  /// in streaming mode.
  DenseMatrix block() const { return streamed_ ? DenseMatrix(half_ * weights_) : block_; }

 private:
  static constexpr Index kChunk = 1024;
  CdmOptions opts_;
  DenseMatrix half_;
  DenseMatrix block_;
  DenseMatrix weights_;
  std::vector<std::size_t> admissible_;
  bool streamed_ = false;
};

/// Pivoted Cholesky on the normalized approximate-error Gramian over
/// training[indices]; the first M pivots (in pivot order) form the domain.
template <class Op>
CdmConstruction cdm_construct(const ReducedModel<Op>& model, const CdmOfflineData<Op>& offline,
                              const DenseMatrix& params, std::span<const std::size_t> indices, std::size_t budget,
                              const DenseMatrix* coeffs = nullptr, const CdmOptions& opts = {}) {
  if (budget < 1) throw InvalidParameter("CDM budget must be >= 1");
  const NormalizedErrorField<Op> field(model, offline, params, indices, coeffs, opts);
  const auto na = static_cast<Index>(field.admissible().size());
  const auto chol = pivoted_cholesky([&](Index j) { return field.gramian_column(j); }, Vector::Ones(na), budget,
                                     1e-12);
  CdmConstruction out;
  out.domain.method = Method::cdm;
  out.domain.budget = budget;
  for (Index p : chol.pivots)
    out.domain.indices.push_back(indices[field.admissible()[static_cast<std::size_t>(p)]]);
  out.admissible = field.admissible().size();
  out.pivot_diagonals = chol.pivot_diagonals;
  out.psd_warnings = chol.psd_warnings;
  out.streamed = field.streamed();
  return out;
}

}  // namespace rbx
