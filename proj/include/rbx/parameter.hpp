#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "rbx/errors.hpp"

namespace rbx {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A point in parameter space. Length equals the problem's parameter dimension.
using Parameter = Eigen::VectorXd;

/// Axis-aligned parameter domain [lower, upper].
struct ParameterBox {
  Vector lower;
  Vector upper;

  static ParameterBox cube(Index dim, double lo, double hi) {
    return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
  }

  Index dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw ConfigError("parameter box bounds must be nonempty and of equal length");
    for (Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i])) throw ConfigError("parameter box requires lower < upper");
  }

  bool contains(const Eigen::Ref<const Vector>& mu) const {
    if (mu.size() != dim()) return false;
    return (mu.array() >= lower.array()).all() && (mu.array() <= upper.array()).all();
  }

  /// Throws InvalidParameter unless mu has the box dimension and lies inside.
  void check(const Eigen::Ref<const Vector>& mu) const {
    if (mu.size() != dim())
      throw InvalidParameter("parameter has dimension " + std::to_string(mu.size()) +
                             ", expected " + std::to_string(dim()));
    if (!contains(mu)) throw InvalidParameter("parameter outside the parameter box");
  }
};

struct GridSampling {
  int n_per_dim = 2;
};

struct RandomSampling {
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

using SamplingSpec = std::variant<GridSampling, RandomSampling>;

/// Finite training set. Points are stored column-wise (p x N_train).
struct TrainingSet {
  DenseMatrix points;
  std::string provenance;  // "grid" or "random"
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  Index dim() const { return points.rows(); }
  auto operator[](std::size_t i) const { return points.col(static_cast<Index>(i)); }
};

inline constexpr std::size_t kDefaultTrainingCap = 50'000'000;

/// Maps a 64-bit draw onto [0, 1) with 53 bits of mantissa.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Tensor grid (lexicographic, last dimension fastest, endpoints included)
/// or seeded i.i.d. uniform sampling of the box.
inline TrainingSet sample_training_set(const ParameterBox& box, const SamplingSpec& spec,
                                       std::size_t max_points = kDefaultTrainingCap) {
  box.validate();
  const Index p = box.dim();
  TrainingSet ts;

  if (const auto* grid = std::get_if<GridSampling>(&spec)) {
    if (grid->n_per_dim < 2) throw ConfigError("grid sampling needs n_per_dim >= 2");
    double total = 1.0;
    for (Index d = 0; d < p; ++d) total *= grid->n_per_dim;
    if (total > static_cast<double>(max_points))
      throw ResourceError("training grid exceeds the configured point cap");
    const auto n = static_cast<Index>(total);
    const int m = grid->n_per_dim;
    ts.points.resize(p, n);
    for (Index k = 0; k < n; ++k) {
      Index rem = k;
      for (Index d = p - 1; d >= 0; --d) {
        const Index i = rem % m;
        rem /= m;
        // Exact endpoints, equispaced interior.
        const double t = static_cast<double>(i) / static_cast<double>(m - 1);
        ts.points(d, k) = (i == m - 1) ? box.upper[d] : box.lower[d] + t * (box.upper[d] - box.lower[d]);
      }
    }
    ts.provenance = "grid";
    return ts;
  }

  const auto& rnd = std::get<RandomSampling>(spec);
  if (rnd.count < 1) throw ConfigError("random sampling needs count >= 1");
  if (rnd.count > max_points) throw ResourceError("random training set exceeds the configured point cap");
  std::mt19937_64 gen(rnd.seed);
  ts.points.resize(p, static_cast<Index>(rnd.count));
  for (Index k = 0; k < ts.points.cols(); ++k)
    for (Index d = 0; d < p; ++d)
      ts.points(d, k) = box.lower[d] + unit_interval(gen()) * (box.upper[d] - box.lower[d]);
  ts.provenance = "random";
  ts.seed = rnd.seed;
  return ts;
}

}  // namespace rbx
