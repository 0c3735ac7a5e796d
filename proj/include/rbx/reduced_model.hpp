#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rbx/counters.hpp"
#include "rbx/parallel.hpp"
#include "rbx/truth/truth_model.hpp"

namespace rbx {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// Relative norm below which an orthogonalized snapshot counts as dependent.
inline constexpr double kDependenceTol = 1e-10;

/// Negative squared residual norms beyond this fraction of (C,C) are flagged.
inline constexpr double kCancellationWarnTol = 1e-6;

struct ReducedSolution {
  Vector coeffs;  // coordinates in the X-orthonormal basis
  Parameter mu;
};

/// X-orthonormal reduced basis with every parameter-independent quantity the
/// online stage needs.
///
/// Affine residual terms are stored m-major: column j = m * Q_a + q holds the
/// Riesz representer L_m^q of -a^q(xi_m, .), so the squared dual norm of the
/// residual is the quadratic form
///     g^2 (C,C) + 2 g w^T cl + w^T LL w,   w_j = theta_q(mu) c_m(mu).
/// The online estimator does not evaluate that form (it cancels down to about
/// sqrt(machine eps) of its largest term). It uses a thin QR of the X-half
/// applied representers, H [C, L] = U T, so |r|_{X'} = |T [g; w]|_2.
template <class Op>
class ReducedModel {
 public:
  explicit ReducedModel(const TruthModel<Op>& truth) : truth_(&truth) {
    const Index n_dof = truth.n_dof();
    const Index qa = truth.problem.n_terms();
    basis_.resize(n_dof, 0);
    x_basis_.resize(n_dof, 0);
    snapshot_params_.resize(truth.problem.param_dim(), 0);
    coords_.resize(0, 0);
    reduced_components_.assign(static_cast<std::size_t>(qa), DenseMatrix(0, 0));
    reduced_rhs_.resize(0);
    reduced_output_.resize(0);
    riesz_f_ = truth.disc.riesz_solve(truth.problem.rhs);
    residual_cc_ = riesz_f_.dot(truth.problem.rhs);
    riesz_terms_.resize(n_dof, 0);
    applied_.resize(n_dof, 0);
    residual_cl_.resize(0);
    residual_ll_.resize(0, 0);
    res_q_.resize(n_dof, 0);
    res_t_.resize(0, 0);
    append_residual_columns(truth.disc.x_half_apply(DenseMatrix(riesz_f_)));
    res_rank_.push_back(res_q_.cols());
  }

  const TruthModel<Op>& truth() const { return *truth_; }
  Index size() const { return basis_.cols(); }
  bool empty() const { return size() == 0; }
  Index n_terms() const { return truth_->problem.n_terms(); }

  const DenseMatrix& basis() const { return basis_; }
  /// X applied to each basis vector.
  const DenseMatrix& x_basis() const { return x_basis_; }
  const std::vector<std::size_t>& snapshot_indices() const { return snapshot_indices_; }
  const DenseMatrix& snapshot_params() const { return snapshot_params_; }
  /// Upper-triangular R with snapshot_j = sum_i R(i, j) xi_i.
  const DenseMatrix& snapshot_coords() const { return coords_; }
  const std::vector<DenseMatrix>& reduced_components() const { return reduced_components_; }
  const Vector& reduced_rhs() const { return reduced_rhs_; }
  const Vector& reduced_output() const { return reduced_output_; }
  const Vector& riesz_f() const { return riesz_f_; }
  const DenseMatrix& riesz_terms() const { return riesz_terms_; }
  /// A_q xi_m, column m * Q_a + q.
  const DenseMatrix& applied_terms() const { return applied_; }
  double residual_cc() const { return residual_cc_; }
  const Vector& residual_cl() const { return residual_cl_; }
  const DenseMatrix& residual_ll() const { return residual_ll_; }
  /// Triangular factor of the half-applied representers, columns [C, L].
  const DenseMatrix& residual_factor() const { return res_t_; }
  const DenseMatrix& residual_q() const { return res_q_; }

  /// Appends the X-orthonormalized snapshot (modified Gram-Schmidt, two
  /// passes) and updates only the new rows/columns of every reduced block.
  /// Throws BasisRejection if the snapshot is numerically in the span.
  void extend(const TruthSolution& snapshot, std::size_t train_index = kNoIndex) {
    const auto& disc = truth_->disc;
    const auto& problem = truth_->problem;
    const Index n = size();
    const Index qa = n_terms();

    Vector v = snapshot.coefficients;
    const double pre = disc.x_norm(v);
    if (!(pre > 0.0)) throw BasisRejection("snapshot has zero norm");
    Vector r = Vector::Zero(n + 1);
    for (int pass = 0; pass < 2; ++pass)
      for (Index i = 0; i < n; ++i) {
        const double c = x_basis_.col(i).dot(v);
        v -= c * basis_.col(i);
        r[i] += c;
      }
    const double post = disc.x_norm(v);
    if (post < kDependenceTol * pre)
      throw BasisRejection("snapshot is numerically dependent on the reduced basis");
    v /= post;
    r[n] = post;

    basis_.conservativeResize(Eigen::NoChange, n + 1);
    basis_.col(n) = v;
    x_basis_.conservativeResize(Eigen::NoChange, n + 1);
    x_basis_.col(n) = disc.x_apply(v);
    snapshot_params_.conservativeResize(Eigen::NoChange, n + 1);
    snapshot_params_.col(n) = snapshot.mu;
    snapshot_indices_.push_back(train_index);
    coords_.conservativeResize(n + 1, n + 1);
    coords_.row(n).setZero();
    coords_.col(n) = r;

    // A_q xi_n and its Riesz representers.
    DenseMatrix applied_new(truth_->n_dof(), qa);
    bump(counters().truth_dim_ops);
    for (Index q = 0; q < qa; ++q) applied_new.col(q) = problem.components[static_cast<std::size_t>(q)] * v;
    const DenseMatrix riesz_new = disc.riesz_solve(DenseMatrix(-applied_new));

    for (Index q = 0; q < qa; ++q) {
      auto& rc = reduced_components_[static_cast<std::size_t>(q)];
      rc.conservativeResize(n + 1, n + 1);
      for (Index m = 0; m < n; ++m) rc(n, m) = v.dot(applied_.col(m * qa + q));
      rc.col(n) = basis_.transpose() * applied_new.col(q);
    }
    reduced_rhs_.conservativeResize(n + 1);
    reduced_rhs_[n] = v.dot(problem.rhs);
    reduced_output_.conservativeResize(n + 1);
    reduced_output_[n] = v.dot(problem.output);

    const Index old_cols = n * qa;
    applied_.conservativeResize(Eigen::NoChange, old_cols + qa);
    applied_.rightCols(qa) = applied_new;
    riesz_terms_.conservativeResize(Eigen::NoChange, old_cols + qa);
    riesz_terms_.rightCols(qa) = riesz_new;

    // (L_i, L_j)_X = L_i^T X L_j = -L_i^T A_q xi_m.
    residual_cl_.conservativeResize(old_cols + qa);
    residual_cl_.tail(qa) = -(applied_new.transpose() * riesz_f_);
    const DenseMatrix new_cols = -(riesz_terms_.transpose() * applied_new);
    residual_ll_.conservativeResize(old_cols + qa, old_cols + qa);
    residual_ll_.rightCols(qa) = new_cols;
    residual_ll_.bottomLeftCorner(qa, old_cols) = new_cols.topRows(old_cols).transpose();
    auto corner = residual_ll_.bottomRightCorner(qa, qa);
    const DenseMatrix sym = 0.5 * (corner + corner.transpose());
    corner = sym;

    append_residual_columns(disc.x_half_apply(riesz_new));
    res_rank_.push_back(res_q_.cols());
  }

  /// The model restricted to its first n basis vectors.
  ReducedModel truncated(Index n) const {
    if (n < 0 || n > size()) throw InvalidParameter("truncation size out of range");
    const Index qa = n_terms();
    ReducedModel out(*this);
    out.basis_ = basis_.leftCols(n);
    out.x_basis_ = x_basis_.leftCols(n);
    out.snapshot_params_ = snapshot_params_.leftCols(n);
    out.snapshot_indices_.resize(static_cast<std::size_t>(n));
    out.coords_ = coords_.topLeftCorner(n, n);
    for (auto& rc : out.reduced_components_) rc = rc.topLeftCorner(n, n).eval();
    out.reduced_rhs_ = reduced_rhs_.head(n);
    out.reduced_output_ = reduced_output_.head(n);
    out.applied_ = applied_.leftCols(n * qa);
    out.riesz_terms_ = riesz_terms_.leftCols(n * qa);
    out.residual_cl_ = residual_cl_.head(n * qa);
    out.residual_ll_ = residual_ll_.topLeftCorner(n * qa, n * qa);
    const Index rank = res_rank_[static_cast<std::size_t>(n)];
    out.res_q_ = res_q_.leftCols(rank);
    out.res_t_ = res_t_.topLeftCorner(rank, 1 + n * qa);
    out.res_rank_.resize(static_cast<std::size_t>(n) + 1);
    return out;
  }

 private:
  // Block classical Gram-Schmidt, two passes; directions below the drop
  // tolerance (or beyond the truth dimension) are left in T only.
  void append_residual_columns(const DenseMatrix& h) {
    const Index k = res_q_.cols(), cols = res_t_.cols(), add = h.cols();
    DenseMatrix coef = DenseMatrix::Zero(k, add);
    DenseMatrix rem = h;
    for (int pass = 0; pass < 2 && k > 0; ++pass) {
      const DenseMatrix c = res_q_.transpose() * rem;
      rem -= res_q_ * c;
      coef += c;
    }
    res_t_.conservativeResize(k, cols + add);
    res_t_.rightCols(add) = coef;
    for (Index j = 0; j < add; ++j) {
      Vector v = rem.col(j);
      const double ref = h.col(j).norm();
      Vector extra = Vector::Zero(res_q_.cols() - k);
      for (int pass = 0; pass < 2; ++pass)
        for (Index i = k; i < res_q_.cols(); ++i) {
          const double c = res_q_.col(i).dot(v);
          v -= c * res_q_.col(i);
          extra[i - k] += c;
        }
      res_t_.block(k, cols + j, extra.size(), 1) = extra;
      double nv = v.norm();
      if (nv > kResidualDropTol * ref && res_q_.cols() < res_q_.rows()) {
        const Index r = res_q_.cols();
        v /= nv;
        // A small remainder is mostly round-off; reorthogonalize the unit vector.
        for (int pass = 0; pass < 3; ++pass) {
          const Vector c = res_q_.transpose() * v;
          if (c.norm() < 1e-15) break;
          v -= res_q_ * c;
          res_t_.block(0, cols + j, r, 1) += nv * c;
          const double s = v.norm();
          v /= s;
          nv *= s;
        }
        res_q_.conservativeResize(Eigen::NoChange, r + 1);
        res_q_.col(r) = v;
        res_t_.conservativeResize(r + 1, Eigen::NoChange);
        res_t_.row(r).setZero();
        res_t_(r, cols + j) = nv;
      }
    }
  }

  static constexpr double kResidualDropTol = 1e-12;

  const TruthModel<Op>* truth_;
  DenseMatrix basis_;
  DenseMatrix x_basis_;
  std::vector<std::size_t> snapshot_indices_;
  DenseMatrix snapshot_params_;
  DenseMatrix coords_;
  std::vector<DenseMatrix> reduced_components_;
  Vector reduced_rhs_;
  Vector reduced_output_;
  Vector riesz_f_;
  DenseMatrix riesz_terms_;
  DenseMatrix applied_;
  double residual_cc_ = 0.0;
  Vector residual_cl_;
  DenseMatrix residual_ll_;
  DenseMatrix res_q_;
  DenseMatrix res_t_;
  std::vector<Index> res_rank_;  // columns of res_q_ after each extension
};

namespace detail {

/// Solves the leading n x n reduced system for given theta and rhs scale.
template <class Op>
Vector solve_reduced(const ReducedModel<Op>& model, const Vector& theta, double g, Index n) {
  bump(counters().reduced_solves);
  if (n == 0) return Vector(0);
  DenseMatrix a = theta[0] * model.reduced_components()[0].topLeftCorner(n, n);
  for (Index q = 1; q < model.n_terms(); ++q)
    a += theta[q] * model.reduced_components()[static_cast<std::size_t>(q)].topLeftCorner(n, n);
  Eigen::PartialPivLU<DenseMatrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > kMinRcond)) throw NumericalFailure("reduced system is singular", rc);
  return lu.solve(g * model.reduced_rhs().head(n));
}

/// w_j = theta_q c_m with j = m * Q_a + q.
inline Vector residual_weights(const Vector& theta, const Vector& coeffs) {
  const Index qa = theta.size();
  Vector w(coeffs.size() * qa);
  for (Index m = 0; m < coeffs.size(); ++m) w.segment(m * qa, qa) = coeffs[m] * theta;
  return w;
}

inline double clamp_residual(double value, double scale) {
  if (value < 0.0) {
    if (-value > kCancellationWarnTol * scale) bump(counters().conditioning_warnings);
    return 0.0;
  }
  return value;
}

}  // namespace detail

/// Galerkin solve in the reduced space. Cost independent of the truth dimension.
template <class Op>
ReducedSolution reduced_solve(const ReducedModel<Op>& model, const Parameter& mu) {
  if (model.empty()) throw InvalidParameter("reduced solve on an empty basis");
  const auto& problem = model.truth().problem;
  const Vector th = evaluate_theta(problem, mu);
  return {detail::solve_reduced(model, th, evaluate_rhs_theta(problem, mu), model.size()), mu};
}

template <class Op>
double reduced_output(const ReducedModel<Op>& model, const ReducedSolution& sol) {
  if (sol.coeffs.size() != model.size()) throw InvalidParameter("reduced solution size does not match the basis");
  return model.reduced_output().dot(sol.coeffs);
}

/// Reconstructs the truth-space vector sum_m c_m xi_m.
template <class Op>
Vector reconstruct(const ReducedModel<Op>& model, const ReducedSolution& sol) {
  bump(counters().truth_dim_ops);
  return model.basis() * sol.coeffs;
}

/// Squared dual norm of the residual by the quadratic-form expansion.
/// Negative round-off is clamped to zero.
template <class Op>
double residual_gram_form(const ReducedModel<Op>& model, const Parameter& mu, const ReducedSolution& sol) {
  if (sol.coeffs.size() != model.size()) throw InvalidParameter("reduced solution size does not match the basis");
  const auto& problem = model.truth().problem;
  const Vector th = evaluate_theta(problem, mu);
  const double g = evaluate_rhs_theta(problem, mu);
  const double scale = g * g * model.residual_cc();
  if (model.empty()) return scale;
  const Vector w = detail::residual_weights(th, sol.coeffs);
  const double value = scale + 2.0 * g * w.dot(model.residual_cl()) + w.dot(model.residual_ll() * w);
  return detail::clamp_residual(value, scale);
}

/// Squared dual norm of the residual, online (independent of the truth size).
template <class Op>
double residual_dual_norm_sq(const ReducedModel<Op>& model, const Parameter& mu, const ReducedSolution& sol) {
  if (sol.coeffs.size() != model.size()) throw InvalidParameter("reduced solution size does not match the basis");
  const auto& problem = model.truth().problem;
  const Vector th = evaluate_theta(problem, mu);
  Vector v(1 + sol.coeffs.size() * model.n_terms());
  v[0] = evaluate_rhs_theta(problem, mu);
  v.tail(v.size() - 1) = detail::residual_weights(th, sol.coeffs);
  return (model.residual_factor() * v).squaredNorm();
}

/// Delta_N(mu) = |r_N(mu)|_{X'} / alpha_LB(mu).
template <class Op>
double error_estimate(const ReducedModel<Op>& model, const Parameter& mu) {
  bump(counters().estimator_evals);
  const double alpha = coercivity_lower_bound(model.truth(), mu);
  if (model.empty()) {
    const double g = evaluate_rhs_theta(model.truth().problem, mu);
    return std::sqrt(g * g * model.residual_cc()) / alpha;
  }
  const ReducedSolution sol = reduced_solve(model, mu);
  return std::sqrt(residual_dual_norm_sq(model, mu, sol)) / alpha;
}

/// Estimator over training[indices[k]] for all k. Values go to `deltas`;
/// when `coeffs` is non-null its column k receives the reduced coefficients.
/// Residual quadratic forms are evaluated in blocks as matrix products.
template <class Op>
void estimate_batch(const ReducedModel<Op>& model, const DenseMatrix& params, std::span<const std::size_t> indices,
                    std::span<double> deltas, DenseMatrix* coeffs = nullptr, std::size_t workers = 1) {
  const auto count = indices.size();
  if (deltas.size() != count) throw InvalidParameter("output span size mismatch");
  const Index n = model.size();
  const Index qa = model.n_terms();
  if (coeffs) coeffs->resize(n, static_cast<Index>(count));
  const auto& truth = model.truth();
  const auto& problem = truth.problem;
  const auto& factor = model.residual_factor();
  constexpr std::size_t kBlock = 128;

  parallel_chunks(count, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    DenseMatrix w(1 + n * qa, static_cast<Index>(kBlock));
    Vector alpha(static_cast<Index>(kBlock));
    for (std::size_t b0 = begin; b0 < end; b0 += kBlock) {
      const std::size_t b1 = std::min(end, b0 + kBlock);
      const auto nb = static_cast<Index>(b1 - b0);
      for (Index k = 0; k < nb; ++k) {
        const Parameter mu = params.col(static_cast<Index>(indices[b0 + static_cast<std::size_t>(k)]));
        const Vector th = evaluate_theta(problem, mu);
        const double g = evaluate_rhs_theta(problem, mu);
        alpha[k] = coercivity_lower_bound(truth, mu);
        w(0, k) = g;
        if (n > 0) {
          const Vector c = detail::solve_reduced(model, th, g, n);
          if (coeffs) coeffs->col(static_cast<Index>(b0) + k) = c;
          w.col(k).tail(n * qa) = detail::residual_weights(th, c);
        }
      }
      const DenseMatrix r = factor * w.leftCols(nb);
      for (Index k = 0; k < nb; ++k)
        deltas[b0 + static_cast<std::size_t>(k)] = r.col(k).norm() / alpha[k];
      bump(counters().estimator_evals, static_cast<std::uint64_t>(nb));
    }
  });
}

}  // namespace rbx
