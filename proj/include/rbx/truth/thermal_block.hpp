#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rbx/truth/truth_model.hpp"

namespace rbx {

/// Node-level P1 matrices for the 3x3 thermal block on the unit square.
/// Uniform mesh with n nodes per side, node k = j*n + i at (i h, j h); every
/// square cell is cut along its lower-left to upper-right diagonal.
struct ThermalBlockAssembly {
  int n = 0;
  double h = 0.0;
  std::array<SparseMatrix, 9> block_stiffness;  // block b = 3*row + col, row 0 at the base
  SparseMatrix mass;
  SparseMatrix boundary_mass_base;              // 1D mass matrix on y = 0
  Vector x, y;

  Index n_nodes() const { return static_cast<Index>(n) * n; }
  Index node(int i, int j) const { return static_cast<Index>(j) * n + i; }

  SparseMatrix total_stiffness() const {
    SparseMatrix k = block_stiffness[0];
    for (std::size_t b = 1; b < 9; ++b) k += block_stiffness[b];
    return k;
  }
};

inline ThermalBlockAssembly assemble_thermal_block(int nodes_per_side) {
  const int n = nodes_per_side;
  if (n < 4 || (n - 1) % 3 != 0)
    throw ConfigError("thermal block needs nodes_per_side >= 4 with nodes_per_side = 1 (mod 3)");
  ThermalBlockAssembly tb;
  tb.n = n;
  tb.h = 1.0 / (n - 1);
  const Index nn = tb.n_nodes();
  tb.x.resize(nn);
  tb.y.resize(nn);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      tb.x[tb.node(i, j)] = i * tb.h;
      tb.y[tb.node(i, j)] = j * tb.h;
    }

  using Triplet = Eigen::Triplet<double>;
  std::array<std::vector<Triplet>, 9> kt;
  std::vector<Triplet> mt, bt;

  auto add_triangle = [&](std::array<Index, 3> v) {
    const double x0 = tb.x[v[0]], y0 = tb.y[v[0]];
    const double x1 = tb.x[v[1]], y1 = tb.y[v[1]];
    const double x2 = tb.x[v[2]], y2 = tb.y[v[2]];
    const double area = 0.5 * std::abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
    const std::array<double, 3> b{y1 - y2, y2 - y0, y0 - y1};
    const std::array<double, 3> c{x2 - x1, x0 - x2, x1 - x0};
    const double cx = (x0 + x1 + x2) / 3.0, cy = (y0 + y1 + y2) / 3.0;
    const int col = std::min(2, static_cast<int>(cx * 3.0));
    const int row = std::min(2, static_cast<int>(cy * 3.0));
    auto& k = kt[static_cast<std::size_t>(3 * row + col)];
    for (int a = 0; a < 3; ++a)
      for (int e = 0; e < 3; ++e) {
        k.emplace_back(v[a], v[e], (b[a] * b[e] + c[a] * c[e]) / (4.0 * area));
        mt.emplace_back(v[a], v[e], area / 12.0 * (a == e ? 2.0 : 1.0));
      }
  };

  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const Index n00 = tb.node(i, j), n10 = tb.node(i + 1, j);
      const Index n01 = tb.node(i, j + 1), n11 = tb.node(i + 1, j + 1);
      add_triangle({n00, n10, n11});
      add_triangle({n00, n11, n01});
    }
  for (int i = 0; i + 1 < n; ++i) {
    const Index a = tb.node(i, 0), e = tb.node(i + 1, 0);
    bt.emplace_back(a, a, tb.h / 3.0);
    bt.emplace_back(e, e, tb.h / 3.0);
    bt.emplace_back(a, e, tb.h / 6.0);
    bt.emplace_back(e, a, tb.h / 6.0);
  }

  for (std::size_t b = 0; b < 9; ++b) {
    tb.block_stiffness[b].resize(nn, nn);
    tb.block_stiffness[b].setFromTriplets(kt[b].begin(), kt[b].end());
  }
  tb.mass.resize(nn, nn);
  tb.mass.setFromTriplets(mt.begin(), mt.end());
  tb.boundary_mass_base.resize(nn, nn);
  tb.boundary_mass_base.setFromTriplets(bt.begin(), bt.end());
  return tb;
}

/// Rows/columns `keep` of a square sparse matrix.
inline SparseMatrix restrict_sparse(const SparseMatrix& a, const std::vector<Index>& keep) {
  SparseMatrix sel(static_cast<Index>(keep.size()), a.rows());
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t r = 0; r < keep.size(); ++r) t.emplace_back(static_cast<Index>(r), keep[r], 1.0);
  sel.setFromTriplets(t.begin(), t.end());
  SparseMatrix out = sel * a * SparseMatrix(sel.transpose());
  out.makeCompressed();
  return out;
}

/// -div(mu_b grad u) = 0 on the unit square split into 3x3 blocks B_1..B_9
/// (B_1..B_3 along the base), u = 0 on the top edge, du/dn = 1 on the base and
/// 0 on the sides. Output s(mu) = integral of u over the base. X = H1 inner
/// product on the free nodes; coercivity by min-theta anchored at mu = 1.
inline TruthModel<SparseMatrix> build_thermal_block(int nodes_per_side) {
  const ThermalBlockAssembly tb = assemble_thermal_block(nodes_per_side);
  const int n = tb.n;
  std::vector<Index> free;
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i < n; ++i) free.push_back(tb.node(i, j));

  AffineProblem<SparseMatrix> p;
  p.name = "thermalblock";
  p.box = ParameterBox::cube(9, 0.1, 10.0);
  p.theta = [](const Parameter& mu) { return Vector(mu); };
  for (const auto& k : tb.block_stiffness) p.components.push_back(restrict_sparse(k, free));

  const Vector base_load_full = tb.boundary_mass_base * Vector::Ones(tb.n_nodes());
  p.rhs.resize(static_cast<Index>(free.size()));
  for (std::size_t r = 0; r < free.size(); ++r) p.rhs[static_cast<Index>(r)] = base_load_full[free[r]];
  p.output = p.rhs;

  SparseMatrix x_inner = restrict_sparse(SparseMatrix(tb.mass + tb.total_stiffness()), free);
  TruthDiscretization<SparseMatrix> disc(std::move(x_inner), std::move(free), tb.n_nodes(), "thermalblock");

  TruthModel<SparseMatrix> truth{std::move(p), std::move(disc), ConstantBound{1.0}};
  truth.coercivity = make_min_theta_bound(truth.problem, truth.disc, Parameter(Vector::Ones(9)));
  return truth;
}

}  // namespace rbx
