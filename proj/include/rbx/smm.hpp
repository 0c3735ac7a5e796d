#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "rbx/errors.hpp"
#include "rbx/surrogate_domain.hpp"

namespace rbx {

/// Level nu_m = eps_tol + (delta_max - eps_tol) * m / M for m = 0..M-1.
inline double smm_level(double eps_tol, double delta_max, std::size_t m, std::size_t budget) {
  return eps_tol + (delta_max - eps_tol) * static_cast<double>(m) / static_cast<double>(budget);
}

/// Samples the estimator range at M equispaced levels between eps_tol and
/// max(delta). For each level picks the point with the smallest delta that is
/// still >= the level (ties to the lowest position). Returned indices are
/// positions into `delta`, in level order, without duplicates.
inline SurrogateDomain smm_construct(std::span<const double> delta, double eps_tol, std::size_t budget) {
  if (delta.empty()) throw InvalidParameter("SMM needs a nonempty estimator array");
  if (budget < 1) throw InvalidParameter("SMM budget must be >= 1");
  SurrogateDomain out;
  out.method = Method::smm;
  out.budget = budget;

  const double dmax = *std::max_element(delta.begin(), delta.end());
  if (!(dmax > eps_tol)) return out;

  std::vector<std::size_t> order(delta.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return delta[a] < delta[b] || (delta[a] == delta[b] && a < b);
  });

  std::vector<bool> taken(delta.size(), false);
  for (std::size_t m = 0; m < budget; ++m) {
    const double nu = smm_level(eps_tol, dmax, m, budget);
    auto it = std::lower_bound(order.begin(), order.end(), nu,
                               [&](std::size_t idx, double level) { return delta[idx] < level; });
    if (it == order.end()) continue;
    if (!taken[*it]) {
      taken[*it] = true;
      out.indices.push_back(*it);
    }
  }
  return out;
}

}  // namespace rbx
