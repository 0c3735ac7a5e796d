#pragma once

#include <cmath>
#include <numbers>

#include "rbx/errors.hpp"
#include "rbx/parameter.hpp"

namespace rbx::cheb {

/// Chebyshev-Gauss-Lobatto points x_j = cos(pi j/(n-1)), j = 0..n-1 (descending).
inline Vector lobatto_nodes(int n) {
  if (n < 2) throw ConfigError("Chebyshev grid needs at least 2 points");
  Vector x(n);
  for (int j = 0; j < n; ++j) x[j] = std::cos(std::numbers::pi * j / (n - 1));
  return x;
}

/// First-derivative collocation matrix on the Lobatto grid. Diagonal from
/// the negative row sum so that constants are differentiated exactly.
inline DenseMatrix differentiation_matrix(int n) {
  const Vector x = lobatto_nodes(n);
  Vector c = Vector::Ones(n);
  c[0] = c[n - 1] = 2.0;
  for (int j = 1; j < n; j += 2) c[j] = -c[j];
  DenseMatrix d = DenseMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (c[i] / c[j]) / (x[i] - x[j]);
      row += d(i, j);
    }
    d(i, i) = -row;
  }
  return d;
}

/// Clenshaw-Curtis quadrature weights on the same n points over [-1, 1].
inline Vector clenshaw_curtis_weights(int n) {
  if (n < 2) throw ConfigError("Clenshaw-Curtis rule needs at least 2 points");
  const int N = n - 1;
  Vector w = Vector::Zero(n);
  if (N == 1) {
    w.setConstant(1.0);
    return w;
  }
  Vector v = Vector::Ones(N - 1);
  auto theta = [&](int j) { return std::numbers::pi * j / N; };
  if (N % 2 == 0) {
    w[0] = w[N] = 1.0 / (static_cast<double>(N) * N - 1.0);
    for (int k = 1; k < N / 2; ++k)
      for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
    for (int j = 1; j < N; ++j) v[j - 1] -= std::cos(N * theta(j)) / (static_cast<double>(N) * N - 1.0);
  } else {
    w[0] = w[N] = 1.0 / (static_cast<double>(N) * N);
    for (int k = 1; k <= (N - 1) / 2; ++k)
      for (int j = 1; j < N; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < N; ++j) w[j] = 2.0 * v[j - 1] / N;
  return w;
}

}  // namespace rbx::cheb
