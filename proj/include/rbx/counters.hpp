#pragma once

#include <atomic>
#include <cstdint>

namespace rbx {

/// Plain copy of the instrumentation counters at one instant.
struct CounterSnapshot {
  std::uint64_t truth_solves = 0;
  std::uint64_t riesz_solves = 0;
  std::uint64_t estimator_evals = 0;
  std::uint64_t reduced_solves = 0;
  std::uint64_t cholesky_steps = 0;
  std::uint64_t approx_error_evals = 0;
  // Any operation whose cost scales with the truth dimension.
  std::uint64_t truth_dim_ops = 0;
  std::uint64_t conditioning_warnings = 0;

  CounterSnapshot operator-(const CounterSnapshot& o) const {
    return {truth_solves - o.truth_solves,
            riesz_solves - o.riesz_solves,
            estimator_evals - o.estimator_evals,
            reduced_solves - o.reduced_solves,
            cholesky_steps - o.cholesky_steps,
            approx_error_evals - o.approx_error_evals,
            truth_dim_ops - o.truth_dim_ops,
            conditioning_warnings - o.conditioning_warnings};
  }
};

class CostCounters {
 public:
  std::atomic<std::uint64_t> truth_solves{0};
  std::atomic<std::uint64_t> riesz_solves{0};
  std::atomic<std::uint64_t> estimator_evals{0};
  std::atomic<std::uint64_t> reduced_solves{0};
  std::atomic<std::uint64_t> cholesky_steps{0};
  std::atomic<std::uint64_t> approx_error_evals{0};
  std::atomic<std::uint64_t> truth_dim_ops{0};
  std::atomic<std::uint64_t> conditioning_warnings{0};

  void reset() {
    for (auto* c : {&truth_solves, &riesz_solves, &estimator_evals, &reduced_solves,
                    &cholesky_steps, &approx_error_evals, &truth_dim_ops,
                    &conditioning_warnings})
      c->store(0, std::memory_order_relaxed);
  }

  CounterSnapshot snapshot() const {
    auto ld = [](const std::atomic<std::uint64_t>& a) { return a.load(std::memory_order_relaxed); };
    return {ld(truth_solves),   ld(riesz_solves),       ld(estimator_evals),
            ld(reduced_solves), ld(cholesky_steps),     ld(approx_error_evals),
            ld(truth_dim_ops),  ld(conditioning_warnings)};
  }
};

/// Process-wide counters. Reset between greedy runs by the harness.
inline CostCounters& counters() {
  static CostCounters instance;
  return instance;
}

inline void bump(std::atomic<std::uint64_t>& c, std::uint64_t by = 1) {
  c.fetch_add(by, std::memory_order_relaxed);
}

}  // namespace rbx
