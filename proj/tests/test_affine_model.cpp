#include <gtest/gtest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "rbx/affine_problem.hpp"
#include "rbx/parameter.hpp"
#include "rbx/truth/diffusion2d.hpp"
#include "rbx/truth/thermal_block.hpp"

using namespace rbx;

namespace {

// Chebyshev differentiation with the closed-form diagonal entries.
DenseMatrix cheb_closed_form(int n) {
  const int N = n - 1;
  Vector x(n), c(n);
  for (int j = 0; j <= N; ++j) {
    x[j] = std::cos(std::numbers::pi * j / N);
    c[j] = ((j == 0 || j == N) ? 2.0 : 1.0) * (j % 2 ? -1.0 : 1.0);
  }
  DenseMatrix d(n, n);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) {
      if (i != j) d(i, j) = c[i] / c[j] / (x[i] - x[j]);
    }
  for (int j = 1; j < N; ++j) d(j, j) = -x[j] / (2.0 * (1.0 - x[j] * x[j]));
  d(0, 0) = (2.0 * N * N + 1.0) / 6.0;
  d(N, N) = -d(0, 0);
  return d;
}

}  // namespace

TEST(ParameterBox, ValidateAndContain) {
  const ParameterBox box = ParameterBox::cube(2, -1.0, 1.0);
  EXPECT_NO_THROW(box.validate());
  EXPECT_TRUE(box.contains(Vector::Zero(2)));
  EXPECT_TRUE(box.contains(Vector::Constant(2, 1.0)));
  EXPECT_FALSE(box.contains(Vector::Constant(2, 1.5)));
  EXPECT_THROW(box.check(Vector::Zero(3)), InvalidParameter);
  EXPECT_THROW(box.check(Vector::Constant(2, -2.0)), InvalidParameter);
  EXPECT_THROW(ParameterBox::cube(2, 1.0, 1.0).validate(), ConfigError);
}

TEST(TrainingSet, GridIsLexicographicWithExactEndpoints) {
  const ParameterBox box = ParameterBox::cube(2, -0.99, 0.99);
  const TrainingSet t = sample_training_set(box, GridSampling{3});
  ASSERT_EQ(t.size(), 9u);
  EXPECT_EQ(t.provenance, "grid");
  const double v[3] = {-0.99, 0.0, 0.99};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      EXPECT_DOUBLE_EQ(t[static_cast<std::size_t>(3 * a + b)][0], v[a]);
      EXPECT_DOUBLE_EQ(t[static_cast<std::size_t>(3 * a + b)][1], v[b]);
    }
  EXPECT_EQ(t.points(1, 8), 0.99);
}

TEST(TrainingSet, DefaultGridSize) {
  const TrainingSet t = sample_training_set(ParameterBox::cube(2, -0.99, 0.99), GridSampling{160});
  EXPECT_EQ(t.size(), 25600u);
  EXPECT_EQ(t.points.row(0).minCoeff(), -0.99);
  EXPECT_EQ(t.points.row(1).maxCoeff(), 0.99);
}

TEST(TrainingSet, RandomIsSeededAndInBox) {
  const ParameterBox box = ParameterBox::cube(9, 0.1, 10.0);
  const TrainingSet a = sample_training_set(box, RandomSampling{20000, 42});
  const TrainingSet b = sample_training_set(box, RandomSampling{20000, 42});
  const TrainingSet c = sample_training_set(box, RandomSampling{20000, 43});
  EXPECT_EQ(a.size(), 20000u);
  EXPECT_TRUE(a.points == b.points);
  EXPECT_FALSE(a.points == c.points);
  EXPECT_GE(a.points.minCoeff(), 0.1);
  EXPECT_LE(a.points.maxCoeff(), 10.0);
  EXPECT_EQ(a.seed.value(), 42u);
}

TEST(TrainingSet, CapAndInvalidSpecs) {
  const ParameterBox box = ParameterBox::cube(9, 0.1, 10.0);
  EXPECT_THROW(sample_training_set(box, GridSampling{20}), ResourceError);  // 20^9 points
  EXPECT_THROW(sample_training_set(box, RandomSampling{100, 1}, 50), ResourceError);
  EXPECT_THROW(sample_training_set(box, GridSampling{1}), ConfigError);
  EXPECT_THROW(sample_training_set(box, RandomSampling{0, 1}), ConfigError);
}

TEST(AffineProblem, ThetaChecksDimensionAndBox) {
  const auto t = build_diffusion2d(8);
  EXPECT_THROW(evaluate_theta(t.problem, Vector::Zero(3)), InvalidParameter);
  EXPECT_THROW(evaluate_theta(t.problem, Vector::Constant(2, 1.0)), InvalidParameter);
  const Vector th = evaluate_theta(t.problem, (Vector(2) << 0.25, -0.5).finished());
  EXPECT_EQ(th, (Vector(3) << 1.0, 0.25, -0.5).finished());
  EXPECT_EQ(evaluate_rhs_theta(t.problem, Vector::Zero(2)), 1.0);
}

TEST(AffineProblem, AssemblyIsThetaWeightedSum) {
  const auto t = build_thermal_block(7);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  Parameter mu(9);
  for (auto& v : mu) v = u(gen);
  const SparseMatrix a = assemble_operator(t.problem, mu);
  DenseMatrix expect = DenseMatrix::Zero(t.n_dof(), t.n_dof());
  for (int q = 0; q < 9; ++q) expect += mu[q] * DenseMatrix(t.problem.components[static_cast<std::size_t>(q)]);
  EXPECT_LE((DenseMatrix(a) - expect).norm(), 1e-12 * expect.norm());
}

TEST(AffineProblem, CollocationMatchesDirectDiscretization) {
  const int n = 13;
  const auto t = build_diffusion2d(n);
  const DenseMatrix d = cheb_closed_form(n);
  const DenseMatrix eye = DenseMatrix::Identity(n, n);
  const DenseMatrix dxx = Eigen::kroneckerProduct(eye, DenseMatrix(d * d)).eval();
  const DenseMatrix dyy = Eigen::kroneckerProduct(DenseMatrix(d * d), eye).eval();
  const Vector w1 = cheb::clenshaw_curtis_weights(n);
  const Vector w = Eigen::kroneckerProduct(w1, w1).eval();
  const Vector x1 = cheb::lobatto_nodes(n);
  Vector xs(n * n), ys(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      xs[j * n + i] = x1[i];
      ys[j * n + i] = x1[j];
    }
  std::vector<Index> interior;
  for (int j = 1; j < n - 1; ++j)
    for (int i = 1; i < n - 1; ++i) interior.push_back(j * n + i);

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int trial = 0; trial < 3; ++trial) {
    const Parameter mu = (Vector(2) << u(gen), u(gen)).finished();
    const DenseMatrix full = w.asDiagonal() * (DenseMatrix((1.0 + mu[0] * xs.array()).matrix().asDiagonal()) * dxx +
                                               DenseMatrix((1.0 + mu[1] * ys.array()).matrix().asDiagonal()) * dyy);
    const DenseMatrix a = assemble_operator(t.problem, mu);
    double err = 0.0;
    for (std::size_t r = 0; r < interior.size(); ++r)
      for (std::size_t c = 0; c < interior.size(); ++c)
        err = std::max(err, std::abs(a(static_cast<Index>(r), static_cast<Index>(c)) - full(interior[r], interior[c])));
    EXPECT_LE(err, 1e-9 * full.cwiseAbs().maxCoeff());
  }
}

TEST(AffineProblem, ZeroParameterGivesLaplacian) {
  const auto t = build_diffusion2d(9);
  const DenseMatrix a = assemble_operator(t.problem, Vector::Zero(2));
  EXPECT_LE((a - t.problem.components[0]).norm(), 0.0);
}

TEST(AffineProblem, ThermalBlockUnitParameterGivesTotalStiffness) {
  const auto t = build_thermal_block(10);
  const ThermalBlockAssembly tb = assemble_thermal_block(10);
  std::vector<Index> free;
  for (Index k = 0; k < tb.n_nodes() - tb.n; ++k) free.push_back(k);
  const SparseMatrix expect = restrict_sparse(tb.total_stiffness(), free);
  const SparseMatrix a = assemble_operator(t.problem, Vector::Ones(9));
  EXPECT_LE((DenseMatrix(a) - DenseMatrix(expect)).norm(), 1e-12);
  EXPECT_EQ(t.problem.n_terms(), 9);
  EXPECT_EQ(t.problem.param_dim(), 9);
}

TEST(AffineProblem, ThermalBlockComponentsArePositiveSemidefinite) {
  const auto t = build_thermal_block(7);
  for (const auto& c : t.problem.components) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es{DenseMatrix(c)};
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  }
}
