#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rbx/truth/chebyshev.hpp"
#include "rbx/truth/truth_model.hpp"

namespace rbx {

/// Tensor Chebyshev grid on [-1,1]^2. Node k = j*n + i sits at (x_i, y_j).
struct ChebyshevGrid2d {
  int n = 0;
  Vector nodes;      // 1D Lobatto nodes
  Vector weights;    // 1D Clenshaw-Curtis weights
  DenseMatrix d1;    // 1D first derivative
  DenseMatrix dx;    // d/dx on the full grid
  DenseMatrix dy;    // d/dy on the full grid
  std::vector<Index> interior;

  explicit ChebyshevGrid2d(int n_per_dir)
      : n(n_per_dir),
        nodes(cheb::lobatto_nodes(n_per_dir)),
        weights(cheb::clenshaw_curtis_weights(n_per_dir)),
        d1(cheb::differentiation_matrix(n_per_dir)) {
    const Index nn = static_cast<Index>(n) * n;
    dx = DenseMatrix::Zero(nn, nn);
    dy = DenseMatrix::Zero(nn, nn);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Index k = node(i, j);
        for (int m = 0; m < n; ++m) {
          dx(k, node(m, j)) = d1(i, m);
          dy(k, node(i, m)) = d1(j, m);
        }
      }
    for (int j = 1; j < n - 1; ++j)
      for (int i = 1; i < n - 1; ++i) interior.push_back(node(i, j));
  }

  Index node(int i, int j) const { return static_cast<Index>(j) * n + i; }
  Index n_nodes() const { return static_cast<Index>(n) * n; }
  double x(Index k) const { return nodes[k % n]; }
  double y(Index k) const { return nodes[k / n]; }

  DenseMatrix restrict_to_interior(const DenseMatrix& full) const {
    const auto m = static_cast<Index>(interior.size());
    DenseMatrix out(m, m);
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < m; ++c) out(r, c) = full(interior[static_cast<std::size_t>(r)], interior[static_cast<std::size_t>(c)]);
    return out;
  }
};

/// (1 + mu1 x) u_xx + (1 + mu2 y) u_yy = exp(4xy) on [-1,1]^2, u = 0 on the
/// boundary, by Chebyshev collocation with n_x points per direction.
///
/// Affine terms: A_1 = W (D_xx + D_yy), A_2 = W diag(x) D_xx,
/// A_3 = W diag(y) D_yy, theta = (1, mu1, mu2), rhs W exp(4xy), where W holds
/// the tensor Clenshaw-Curtis weights. Scaling collocation row k by w_k leaves
/// the solution unchanged and makes the residual pair with test vectors
/// through the discrete L2 product, so its X-dual norm tracks H^-1 instead of
/// growing with n_x. X = W + D_x^T W D_x + D_y^T W D_y. Output is the integral
/// of u.
inline TruthModel<DenseMatrix> build_diffusion2d(int n_x) {
  if (n_x < 4) throw ConfigError("diffusion2d needs n_x >= 4");
  const ChebyshevGrid2d g(n_x);
  const Index nn = g.n_nodes();

  const DenseMatrix dxx = g.dx * g.dx;
  const DenseMatrix dyy = g.dy * g.dy;
  Vector xs(nn), ys(nn), w(nn);
  for (Index k = 0; k < nn; ++k) {
    xs[k] = g.x(k);
    ys[k] = g.y(k);
    w[k] = g.weights[k % n_x] * g.weights[k / n_x];
  }

  AffineProblem<DenseMatrix> p;
  p.name = "diffusion2d";
  p.box = ParameterBox::cube(2, -0.99, 0.99);
  p.theta = [](const Parameter& mu) {
    Vector th(3);
    th << 1.0, mu[0], mu[1];
    return th;
  };
  p.components.push_back(g.restrict_to_interior(w.asDiagonal() * (dxx + dyy)));
  p.components.push_back(g.restrict_to_interior(w.asDiagonal() * (xs.asDiagonal() * dxx)));
  p.components.push_back(g.restrict_to_interior(w.asDiagonal() * (ys.asDiagonal() * dyy)));

  const auto m = static_cast<Index>(g.interior.size());
  p.rhs.resize(m);
  p.output.resize(m);
  for (Index r = 0; r < m; ++r) {
    const Index k = g.interior[static_cast<std::size_t>(r)];
    p.rhs[r] = w[k] * std::exp(4.0 * xs[k] * ys[k]);
    p.output[r] = w[k];
  }

  const DenseMatrix mass = w.asDiagonal();
  const DenseMatrix x_full = mass + g.dx.transpose() * w.asDiagonal() * g.dx +
                             g.dy.transpose() * w.asDiagonal() * g.dy;
  DenseMatrix x_inner = g.restrict_to_interior(x_full);
  x_inner = 0.5 * (x_inner + x_inner.transpose()).eval();

  TruthDiscretization<DenseMatrix> disc(std::move(x_inner), g.interior, nn, "diffusion2d");
  return {std::move(p), std::move(disc), ConstantBound{1.0}};
}

}  // namespace rbx
