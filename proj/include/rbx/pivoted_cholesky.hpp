#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rbx/counters.hpp"
#include "rbx/parameter.hpp"

namespace rbx {

struct PivotedCholeskyResult {
  std::vector<Index> pivots;
  DenseMatrix factor;                   // n x k, G ~ factor * factor^T
  std::vector<double> pivot_diagonals;  // updated diagonal at each chosen pivot
  std::size_t psd_warnings = 0;
};

/// Left-looking pivoted Cholesky of a PSD matrix given by its diagonal and a
/// column oracle (column(j) returns column j as a Vector of length n).
/// Each step takes the largest updated diagonal, ties to the lowest index, and
/// stops early once that diagonal is <= drop_tol. Updated diagonals below
/// -drop_tol are counted as PSD violations; all negatives are clamped to 0.
template <class ColumnOracle>
PivotedCholeskyResult pivoted_cholesky(ColumnOracle&& column, Vector diag, std::size_t steps, double drop_tol) {
  const Index n = diag.size();
  PivotedCholeskyResult out;
  const auto k_max = static_cast<Index>(std::min<std::size_t>(steps, static_cast<std::size_t>(n)));
  out.factor.resize(n, k_max);
  Index k = 0;
  for (; k < k_max; ++k) {
    Index p = 0;
    for (Index i = 1; i < n; ++i)
      if (diag[i] > diag[p]) p = i;
    if (n == 0 || diag[p] <= drop_tol) break;

    const double pivot = diag[p];
    Vector col = column(p);
    if (k > 0) col.noalias() -= out.factor.leftCols(k) * out.factor.row(p).head(k).transpose();
    col /= std::sqrt(pivot);
    out.factor.col(k) = col;
    diag -= col.cwiseAbs2();
    diag[p] = 0.0;
    for (Index i = 0; i < n; ++i)
      if (diag[i] < 0.0) {
        if (diag[i] < -drop_tol) ++out.psd_warnings;
        diag[i] = 0.0;
      }
    out.pivots.push_back(p);
    out.pivot_diagonals.push_back(pivot);
    bump(counters().cholesky_steps);
  }
  out.factor.conservativeResize(Eigen::NoChange, k);
  return out;
}

/// Convenience overload for an explicit matrix.
inline PivotedCholeskyResult pivoted_cholesky(const DenseMatrix& g, std::size_t steps, double drop_tol) {
  return pivoted_cholesky([&](Index j) -> Vector { return g.col(j); }, Vector(g.diagonal()), steps, drop_tol);
}

}  // namespace rbx
