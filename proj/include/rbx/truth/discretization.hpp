#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rbx/counters.hpp"
#include "rbx/parameter.hpp"
#include "rbx/truth/linear_solver.hpp"

namespace rbx {

/// Truth space X^N restricted to the free (non-Dirichlet) degrees of freedom,
/// together with its inner product matrix and a cached Cholesky factor.
template <class Op>
class TruthDiscretization {
 public:
  TruthDiscretization(Op x_inner, std::vector<Index> free_nodes, Index n_nodes, std::string tag)
      : x_(std::move(x_inner)),
        free_nodes_(std::move(free_nodes)),
        n_nodes_(n_nodes),
        tag_(std::move(tag)),
        x_factor_(std::make_shared<SpdFactorization<Op>>(x_)) {
    if (x_.rows() != x_.cols() || x_.rows() != static_cast<Index>(free_nodes_.size()))
      throw ConfigError("inner product matrix does not match the free degree-of-freedom count");
  }

  Index n_dof() const { return x_.rows(); }
  /// Total node count including constrained nodes.
  Index n_nodes() const { return n_nodes_; }
  const Op& x_inner() const { return x_; }
  const std::vector<Index>& free_nodes() const { return free_nodes_; }
  const std::string& tag() const { return tag_; }

  std::vector<Index> dirichlet_nodes() const {
    std::vector<bool> is_free(static_cast<std::size_t>(n_nodes_), false);
    for (Index i : free_nodes_) is_free[static_cast<std::size_t>(i)] = true;
    std::vector<Index> out;
    for (Index i = 0; i < n_nodes_; ++i)
      if (!is_free[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  /// v with X v = functional.
  Vector riesz_solve(const Vector& functional) const {
    check_length(functional.size());
    bump(counters().riesz_solves);
    bump(counters().truth_dim_ops);
    return x_factor_->solve(functional);
  }

  /// Column-wise Riesz solve.
  DenseMatrix riesz_solve(const DenseMatrix& functionals) const {
    check_length(functionals.rows());
    bump(counters().riesz_solves, static_cast<std::uint64_t>(functionals.cols()));
    bump(counters().truth_dim_ops);
    return x_factor_->solve(functionals);
  }

  Vector x_apply(const Vector& v) const {
    check_length(v.size());
    bump(counters().truth_dim_ops);
    return x_ * v;
  }

  DenseMatrix x_apply(const DenseMatrix& v) const {
    check_length(v.rows());
    bump(counters().truth_dim_ops);
    return x_ * v;
  }

  double x_inner_product(const Vector& a, const Vector& b) const { return a.dot(x_apply(b)); }

  double x_norm(const Vector& v) const { return std::sqrt(std::max(0.0, x_inner_product(v, v))); }

  /// R v such that the Euclidean geometry of R v is the X geometry of v.
  DenseMatrix x_half_apply(const DenseMatrix& v) const {
    check_length(v.rows());
    bump(counters().truth_dim_ops);
    return x_factor_->half_apply(v);
  }

  /// Scatter free-DoF values into a full nodal vector (zeros on Dirichlet nodes).
  Vector to_nodal(const Vector& v) const {
    check_length(v.size());
    Vector full = Vector::Zero(n_nodes_);
    for (std::size_t i = 0; i < free_nodes_.size(); ++i) full[free_nodes_[i]] = v[static_cast<Index>(i)];
    return full;
  }

 private:
  void check_length(Index n) const {
    if (n != n_dof())
      throw InvalidParameter("vector has length " + std::to_string(n) + ", expected " + std::to_string(n_dof()));
  }

  Op x_;
  std::vector<Index> free_nodes_;
  Index n_nodes_;
  std::string tag_;
  std::shared_ptr<const SpdFactorization<Op>> x_factor_;
};

}  // namespace rbx
