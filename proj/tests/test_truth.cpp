#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rbx/truth/chebyshev.hpp"
#include "rbx/truth/diffusion2d.hpp"
#include "rbx/truth/thermal_block.hpp"

using namespace rbx;

namespace {

// Barycentric interpolation matrix from Lobatto nodes `from` to points `to`.
DenseMatrix barycentric(const Vector& from, const Vector& to) {
  const Index n = from.size();
  Vector w(n);
  for (Index j = 0; j < n; ++j) w[j] = ((j % 2) ? -1.0 : 1.0) * ((j == 0 || j == n - 1) ? 0.5 : 1.0);
  DenseMatrix p = DenseMatrix::Zero(to.size(), n);
  for (Index i = 0; i < to.size(); ++i) {
    bool hit = false;
    for (Index j = 0; j < n; ++j)
      if (to[i] == from[j]) {
        p(i, j) = 1.0;
        hit = true;
      }
    if (hit) continue;
    double den = 0.0;
    for (Index j = 0; j < n; ++j) den += w[j] / (to[i] - from[j]);
    for (Index j = 0; j < n; ++j) p(i, j) = w[j] / (to[i] - from[j]) / den;
  }
  return p;
}

// Nodal values as an n x n matrix U(i, j) = u(x_i, y_j).
DenseMatrix nodal_grid(const TruthModel<DenseMatrix>& t, const Vector& u, int n) {
  const Vector full = t.disc.to_nodal(u);
  DenseMatrix g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = full[j * n + i];
  return g;
}

}  // namespace

TEST(Chebyshev, NodesAreDescendingLobattoPoints) {
  const Vector x = cheb::lobatto_nodes(5);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[4], -1.0);
  EXPECT_NEAR(x[1], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(x[2], 0.0, 1e-15);
  EXPECT_THROW(cheb::lobatto_nodes(1), ConfigError);
}

TEST(Chebyshev, DifferentiatesPolynomialsExactly) {
  const int n = 12;
  const Vector x = cheb::lobatto_nodes(n);
  const DenseMatrix d = cheb::differentiation_matrix(n);
  const Vector x2 = x.array().square();
  EXPECT_LE((d * d * x2 - Vector::Constant(n, 2.0)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((d * x2 - 2.0 * x).cwiseAbs().maxCoeff(), 1e-12);
  const Vector x5 = x.array().pow(5);
  EXPECT_LE((d * x5 - 5.0 * x.array().pow(4).matrix()).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LE((d * Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Chebyshev, ClenshawCurtisIntegratesPolynomials) {
  for (int n : {2, 5, 8, 35}) {
    const Vector x = cheb::lobatto_nodes(n);
    const Vector w = cheb::clenshaw_curtis_weights(n);
    for (int k = 0; k < n; ++k) {
      const double exact = (k % 2) ? 0.0 : 2.0 / (k + 1);
      EXPECT_NEAR(w.dot(x.array().pow(k).matrix()), exact, 1e-13) << "n=" << n << " k=" << k;
    }
    EXPECT_GT(w.minCoeff(), 0.0);
  }
}

TEST(Diffusion2d, SizesAndBoundary) {
  const auto t = build_diffusion2d(35);
  EXPECT_EQ(t.n_dof(), 33 * 33);
  EXPECT_EQ(t.disc.n_nodes(), 35 * 35);
  EXPECT_EQ(t.disc.dirichlet_nodes().size(), 4u * 34u);
  EXPECT_EQ(t.disc.tag(), "diffusion2d");
  EXPECT_THROW(build_diffusion2d(3), ConfigError);
}

TEST(Diffusion2d, OperatorOnBubblePolynomial) {
  // u = (1 - x^2)(1 - y^2): (1 + mu1 x) u_xx + (1 + mu2 y) u_yy is exact at the nodes.
  const int n = 10;
  const auto t = build_diffusion2d(n);
  const ChebyshevGrid2d g(n);
  const Parameter mu = (Vector(2) << 0.3, -0.7).finished();
  Vector u(t.n_dof()), expect(t.n_dof());
  const Vector w = cheb::clenshaw_curtis_weights(n);
  for (std::size_t r = 0; r < g.interior.size(); ++r) {
    const Index k = g.interior[r];
    const double x = g.x(k), y = g.y(k);
    u[static_cast<Index>(r)] = (1 - x * x) * (1 - y * y);
    const double lu = (1 + mu[0] * x) * (-2.0) * (1 - y * y) + (1 + mu[1] * y) * (-2.0) * (1 - x * x);
    expect[static_cast<Index>(r)] = w[k % n] * w[k / n] * lu;
  }
  const DenseMatrix a = assemble_operator(t.problem, mu);
  EXPECT_LE((a * u - expect).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Diffusion2d, ConvergesUnderRefinement) {
  // f != 0 at the corners gives corner singularities, so convergence is
  // algebraic rather than spectral.
  const Parameter mu = (Vector(2) << 0.5, 0.5).finished();
  const auto ref = build_diffusion2d(49);
  const DenseMatrix ur = nodal_grid(ref, truth_solve(ref, mu).coefficients, 49);
  auto err = [&](int n) {
    const auto c = build_diffusion2d(n);
    const DenseMatrix p = barycentric(cheb::lobatto_nodes(49), cheb::lobatto_nodes(n));
    return (p * ur * p.transpose() - nodal_grid(c, truth_solve(c, mu).coefficients, n)).cwiseAbs().maxCoeff();
  };
  const double e13 = err(13), e25 = err(25), e35 = err(35);
  EXPECT_LT(e25, 0.1 * e13);
  EXPECT_LE(e35, 2e-5);
  EXPECT_GT(ur.cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Diffusion2d, InnerProductIsSpd) {
  const auto t = build_diffusion2d(12);
  const DenseMatrix& x = t.disc.x_inner();
  EXPECT_LE((x - x.transpose()).norm(), 1e-12 * x.norm());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(x);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(ThermalBlock, SizesAndDirichletMap) {
  const auto t = build_thermal_block(19);
  EXPECT_EQ(t.disc.n_nodes(), 361);
  EXPECT_EQ(t.n_dof(), 342);
  const auto d = t.disc.dirichlet_nodes();
  ASSERT_EQ(d.size(), 19u);
  EXPECT_EQ(d.front(), 18 * 19);
  EXPECT_THROW(build_thermal_block(18), ConfigError);
  EXPECT_THROW(build_thermal_block(1), ConfigError);
}

TEST(ThermalBlock, PatchTestReproducesLinearSolution) {
  // With unit conductivity, u = 1 - y satisfies u = 0 on top, du/dn = 1 on the
  // base and 0 on the sides; P1 elements reproduce it exactly.
  const auto t = build_thermal_block(19);
  const ThermalBlockAssembly tb = assemble_thermal_block(19);
  const TruthSolution s = truth_solve(t, Parameter(Vector::Ones(9)));
  const auto& free = t.disc.free_nodes();
  double err = 0.0;
  for (std::size_t r = 0; r < free.size(); ++r)
    err = std::max(err, std::abs(s.coefficients[static_cast<Index>(r)] - (1.0 - tb.y[free[r]])));
  EXPECT_LE(err, 1e-12);
  EXPECT_NEAR(t.problem.output.dot(s.coefficients), 1.0, 1e-12);
}

TEST(ThermalBlock, BlocksPartitionTheDomain) {
  const ThermalBlockAssembly tb = assemble_thermal_block(10);
  const Vector ones = Vector::Ones(tb.n_nodes());
  EXPECT_NEAR(ones.dot(tb.mass * ones), 1.0, 1e-13);
  EXPECT_NEAR(ones.dot(tb.boundary_mass_base * ones), 1.0, 1e-13);
  // Stiffness of each block against x: integral of |grad x|^2 over a 1/9 block.
  for (const auto& k : tb.block_stiffness) EXPECT_NEAR(tb.x.dot(k * tb.x), 1.0 / 9.0, 1e-13);
  EXPECT_LE((tb.total_stiffness() * ones).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ThermalBlock, OutputConvergesUnderRefinement) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  Parameter mu(9);
  for (auto& v : mu) v = u(gen);
  const auto coarse = build_thermal_block(19);
  const auto fine = build_thermal_block(73);
  const double sc = coarse.problem.output.dot(truth_solve(coarse, mu).coefficients);
  const double sf = fine.problem.output.dot(truth_solve(fine, mu).coefficients);
  EXPECT_LE(std::abs(sc - sf), 0.02 * std::abs(sf));
}

TEST(Discretization, IdentityInnerProduct) {
  TruthDiscretization<DenseMatrix> d(DenseMatrix::Identity(5, 5), {0, 1, 2, 3, 4}, 5, "id");
  const Vector v = (Vector(5) << 3, 4, 0, 0, 0).finished();
  EXPECT_DOUBLE_EQ(d.x_norm(v), 5.0);
  EXPECT_LE((d.riesz_solve(v) - v).norm(), 1e-15);
  EXPECT_TRUE(d.dirichlet_nodes().empty());
  EXPECT_THROW(d.riesz_solve(Vector(Vector::Ones(4))), InvalidParameter);
  EXPECT_THROW(TruthDiscretization<DenseMatrix>(DenseMatrix::Identity(4, 4), {0, 1, 2}, 4, "bad"), ConfigError);
}

TEST(Discretization, RieszRoundTrip) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  const auto p1 = build_diffusion2d(14);
  const auto p2 = build_thermal_block(13);
  Vector f1(p1.n_dof()), f2(p2.n_dof());
  for (auto& v : f1) v = nd(gen);
  for (auto& v : f2) v = nd(gen);
  EXPECT_LE((p1.disc.x_apply(p1.disc.riesz_solve(f1)) - f1).norm(), 1e-10 * f1.norm());
  EXPECT_LE((p2.disc.x_apply(p2.disc.riesz_solve(f2)) - f2).norm(), 1e-10 * f2.norm());
  // Half-apply carries the X geometry.
  const DenseMatrix h = p2.disc.x_half_apply(DenseMatrix(f2));
  EXPECT_NEAR(h.col(0).norm(), p2.disc.x_norm(f2), 1e-10 * p2.disc.x_norm(f2));
}

TEST(TruthSolve, ResidualAndCounters) {
  const auto t = build_thermal_block(10);
  counters().reset();
  const Parameter mu = Vector::LinSpaced(9, 0.2, 9.0);
  std::shared_ptr<const LuFactorization<SparseMatrix>> lu;
  const TruthSolution s = truth_solve(t, mu, &lu);
  ASSERT_TRUE(lu);
  const Vector r = t.problem.rhs - assemble_operator(t.problem, mu) * s.coefficients;
  EXPECT_LE(r.norm(), 1e-10 * t.problem.rhs.norm());
  EXPECT_EQ(counters().snapshot().truth_solves, 1u);
  EXPECT_LE((lu->solve_vector(t.problem.rhs) - s.coefficients).norm(), 1e-12 * s.coefficients.norm());
  EXPECT_THROW(truth_solve(t, Parameter(Vector::Ones(2))), InvalidParameter);
}

TEST(LinearSolver, SingularDenseOperatorThrows) {
  DenseMatrix a = DenseMatrix::Ones(4, 4);
  EXPECT_THROW(LuFactorization<DenseMatrix>{a}, NumericalFailure);
}

TEST(LinearSolver, FactorizationCache) {
  FactorizationCache<DenseMatrix> cache;
  EXPECT_EQ(cache.find(3), nullptr);
  cache.insert(3, std::make_shared<const LuFactorization<DenseMatrix>>(DenseMatrix::Identity(2, 2)));
  ASSERT_NE(cache.find(3), nullptr);
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(cache.find(3)->solve_vector(Vector::Ones(2)), Vector::Ones(2));
}
