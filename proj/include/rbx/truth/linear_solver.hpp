#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>

#include "rbx/counters.hpp"
#include "rbx/errors.hpp"
#include "rbx/parameter.hpp"

namespace rbx {

using SparseMatrix = Eigen::SparseMatrix<double>;

template <class Op>
inline constexpr bool is_sparse_v = std::is_same_v<Op, SparseMatrix>;

/// Smallest reciprocal condition estimate accepted for a dense LU.
inline constexpr double kMinRcond = 1e-15;

/// General (possibly nonsymmetric) direct factorization of a truth operator.
template <class Op>
class LuFactorization {
 public:
  explicit LuFactorization(const Op& a) {
    if constexpr (is_sparse_v<Op>) {
      lu_.analyzePattern(a);
      lu_.factorize(a);
      if (lu_.info() != Eigen::Success)
        throw NumericalFailure("sparse LU factorization failed: " + lu_.lastErrorMessage());
    } else {
      lu_.compute(a);
      rcond_ = lu_.rcond();
      if (!(rcond_ > kMinRcond))
        throw NumericalFailure("truth operator is singular to working precision", rcond_);
    }
  }

  LuFactorization(const LuFactorization&) = delete;
  LuFactorization& operator=(const LuFactorization&) = delete;

  template <class Rhs>
  DenseMatrix solve(const Rhs& b) const {
    return lu_.solve(b);
  }
  Vector solve_vector(const Vector& b) const { return lu_.solve(b); }

  /// NaN for sparse factorizations, which do not provide an estimate.
  double rcond() const { return rcond_; }

 private:
  using Impl = std::conditional_t<is_sparse_v<Op>,
                                  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>,
                                  Eigen::PartialPivLU<DenseMatrix>>;
  Impl lu_;
  double rcond_ = std::numeric_limits<double>::quiet_NaN();
};

/// Cholesky factorization of an SPD matrix, used for the X inner product.
/// half_apply(v) returns R v with |R v|_2 = |v|_X.
template <class Op>
class SpdFactorization {
 public:
  explicit SpdFactorization(const Op& a) {
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) throw NumericalFailure("matrix is not symmetric positive definite");
  }

  SpdFactorization(const SpdFactorization&) = delete;
  SpdFactorization& operator=(const SpdFactorization&) = delete;

  template <class Rhs>
  DenseMatrix solve(const Rhs& b) const {
    return llt_.solve(b);
  }

  DenseMatrix half_apply(const DenseMatrix& v) const {
    if constexpr (is_sparse_v<Op>) {
      // P A P^T = L L^T, so v^T A v = |L^T P v|^2.
      DenseMatrix pv = llt_.permutationP() * v;
      return llt_.matrixU() * pv;
    } else {
      return llt_.matrixU() * v;
    }
  }

 private:
  using Impl = std::conditional_t<is_sparse_v<Op>, Eigen::SimplicialLLT<SparseMatrix>, Eigen::LLT<DenseMatrix>>;
  Impl llt_;
};

/// Factorizations of A(mu^m) keyed by snapshot position m. Entries are
/// immutable once inserted; concurrent solves against one entry are fine.
template <class Op>
class FactorizationCache {
 public:
  using Entry = std::shared_ptr<const LuFactorization<Op>>;

  void insert(std::size_t key, Entry f) {
    std::lock_guard lock(mu_);
    map_[key] = std::move(f);
  }

  Entry find(std::size_t key) const {
    std::lock_guard lock(mu_);
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::size_t, Entry> map_;
};

}  // namespace rbx
