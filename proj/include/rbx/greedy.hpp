#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "rbx/cdm.hpp"
#include "rbx/counters.hpp"
#include "rbx/reduced_model.hpp"
#include "rbx/smm.hpp"
#include "rbx/surrogate_domain.hpp"

namespace rbx {

struct IterationRecord;

struct GreedyConfig {
  double eps_tol = 1e-6;
  std::size_t n_max = 200;
  Method method = Method::classical;
  int k_damp = 1;
  // Surrogate budget M_l for outer loop l >= 1.
  std::function<std::size_t(int)> m_schedule = [](int ell) { return static_cast<std::size_t>(2 * (ell + 1)); };
  std::uint64_t seed = 0;
  std::size_t cdm_q_cap = kDefaultCdmQCap;
  std::size_t workers = 1;
  std::size_t memory_cap_bytes = kDefaultMemoryCapBytes;
  // Optional progress hook, called after every recorded sweep.
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const {
    if (!(eps_tol > 0.0)) throw ConfigError("eps_tol must be positive");
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    if (k_damp < 1) throw ConfigError("k_damp must be >= 1");
    if (!m_schedule) throw ConfigError("m_schedule is required");
    if (cdm_q_cap < 1) throw ConfigError("cdm_q_cap must be >= 1");
  }
};

/// One greedy sweep (global over the training set or over a surrogate domain).
struct IterationRecord {
  std::size_t n = 0;             // basis size the sweep was evaluated with
  std::size_t train_index = 0;   // maximizer
  double delta_max = 0.0;
  std::size_t domain_size = 0;
  std::uint64_t cum_estimator_evals = 0;
  double cum_wall_ms = 0.0;
  int ell = 0;                   // 0 for classical
  bool global = true;
  bool accepted = false;         // maximizer became a snapshot
};

struct OuterLoopRecord {
  int ell = 0;
  double e_ell = 0.0;
  std::size_t m_ell = 0;          // budget M_l
  std::size_t surrogate_size = 0; // |Xi_sur| as constructed
  std::size_t n_ell = 0;          // snapshots accepted from the surrogate
  double sar() const { return m_ell == 0 ? 0.0 : static_cast<double>(n_ell) / static_cast<double>(m_ell); }
};

struct GreedyTrace {
  Method method = Method::classical;
  std::vector<IterationRecord> iterations;
  std::vector<OuterLoopRecord> outer;
  std::vector<std::size_t> snapshot_order;  // training indices
  std::vector<std::size_t> skipped;         // rejected by basis extension
  std::uint64_t estimator_evals = 0;
  std::uint64_t global_sweep_evals = 0;
  std::size_t global_sweeps = 0;
  double final_global_delta_max = std::numeric_limits<double>::infinity();
  bool converged = false;
  double total_wall_ms = 0.0;
  double snapshot_solve_ms = 0.0;  // included in total_wall_ms
  double spd_ms = 0.0;             // included in total_wall_ms
};

template <class Op>
struct GreedyResult {
  ReducedModel<Op> model;
  GreedyTrace trace;
};

struct SweepResult {
  std::size_t position = 0;     // maximizer position in the domain
  std::size_t train_index = 0;
  double delta_max = 0.0;
  std::vector<double> values;   // aligned with the domain
  DenseMatrix coeffs;           // reduced coefficients, when requested
};

/// Estimator over every point of `domain`; maximizer ties go to the lowest
/// training index.
template <class Op>
SweepResult argmax_sweep(const ReducedModel<Op>& model, const TrainingSet& train, std::span<const std::size_t> domain,
                         std::size_t workers = 1, bool keep_coeffs = false) {
  if (domain.empty()) throw InvalidParameter("sweep domain is empty");
  SweepResult out;
  out.values.resize(domain.size());
  estimate_batch(model, train.points, domain, std::span<double>(out.values), keep_coeffs ? &out.coeffs : nullptr,
                 workers);
  std::size_t best = 0;
  for (std::size_t k = 1; k < domain.size(); ++k) {
    const double v = out.values[k], b = out.values[best];
    if (v > b || (v == b && domain[k] < domain[best])) best = k;
  }
  out.position = best;
  out.train_index = domain[best];
  out.delta_max = out.values[best];
  return out;
}

/// Everything an SPD constructor may look at: the model the sweep was run
/// with, the sweep itself and its domain, the outer loop index and budget.
template <class Op>
struct SpdContext {
  const ReducedModel<Op>& model;
  const TrainingSet& train;
  std::span<const std::size_t> domain;
  const SweepResult& sweep;
  int ell;
  std::size_t budget;
  const GreedyConfig& config;
  const FactorizationCache<Op>& cache;
};

template <class Op>
class SpdConstructor {
 public:
  virtual ~SpdConstructor() = default;
  virtual Method method() const = 0;
  /// Whether the driver should keep reduced coefficients from the global sweep.
  virtual bool needs_coefficients() const { return false; }
  virtual SurrogateDomain construct(const SpdContext<Op>& ctx) = 0;
};

template <class Op>
class SmmConstructor final : public SpdConstructor<Op> {
 public:
  Method method() const override { return Method::smm; }
  SurrogateDomain construct(const SpdContext<Op>& ctx) override {
    SurrogateDomain d = smm_construct(ctx.sweep.values, ctx.config.eps_tol, ctx.budget);
    for (auto& i : d.indices) i = ctx.domain[i];
    d.outer_loop = ctx.ell;
    return d;
  }
};

template <class Op>
class CdmConstructor final : public SpdConstructor<Op> {
 public:
  Method method() const override { return Method::cdm; }
  bool needs_coefficients() const override { return true; }
  SurrogateDomain construct(const SpdContext<Op>& ctx) override {
    offline_.update(ctx.model, ctx.config.cdm_q_cap, &ctx.cache);
    const CdmOptions opts{ctx.config.memory_cap_bytes, ctx.config.workers};
    last_ = cdm_construct(ctx.model, offline_, ctx.train.points, ctx.domain, ctx.budget, &ctx.sweep.coeffs, opts);
    last_.domain.outer_loop = ctx.ell;
    return last_.domain;
  }
  const CdmOfflineData<Op>& offline() const { return offline_; }
  const CdmConstruction& last() const { return last_; }

 private:
  CdmOfflineData<Op> offline_;
  CdmConstruction last_;
};

/// Inner loop continues while eps > E_l / (K_damp (l + 1)).
inline double damping_threshold(double e_ell, int k_damp, int ell) {
  return e_ell / (static_cast<double>(k_damp) * static_cast<double>(ell + 1));
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Shared bookkeeping of the greedy drivers.
template <class Op>
class GreedyState {
 public:
  GreedyState(const TruthModel<Op>& truth, const TrainingSet& train, const GreedyConfig& config, Method method)
      : truth_(truth), train_(train), config_(config), model_(truth), t0_(Clock::now()) {
    config.validate();
    if (train.size() == 0) throw InvalidParameter("training set is empty");
    trace_.method = method;
    evals0_ = counters().snapshot().estimator_evals;
    active_.resize(train.size());
    for (std::size_t i = 0; i < active_.size(); ++i) active_[i] = i;
    cache_first_ = method == Method::cdm ? config.cdm_q_cap : 0;
  }

  /// First snapshot: uniform random training index from the config seed.
  void seed() {
    std::mt19937_64 gen(config_.seed);
    const std::size_t idx = static_cast<std::size_t>(gen() % train_.size());
    add_snapshot(idx);
  }

  /// Truth solve + basis extension. Returns false (and excludes the index
  /// from all later sweeps) if the basis rejects the snapshot.
  bool add_snapshot(std::size_t idx) {
    remove_active(idx);
    const auto ts = Clock::now();
    std::shared_ptr<const LuFactorization<Op>> lu;
    const TruthSolution u = truth_solve(truth_, Parameter(train_[idx]), &lu);
    trace_.snapshot_solve_ms += ms_since(ts);
    try {
      model_.extend(u, idx);
    } catch (const BasisRejection&) {
      trace_.skipped.push_back(idx);
      return false;
    }
    const auto m = static_cast<std::size_t>(model_.size() - 1);
    if (m < cache_first_) cache_.insert(m, std::move(lu));
    trace_.snapshot_order.push_back(idx);
    return true;
  }

  SweepResult sweep(std::span<const std::size_t> domain, bool keep_coeffs) {
    return argmax_sweep(model_, train_, domain, config_.workers, keep_coeffs);
  }

  void record(const SweepResult& s, std::size_t domain_size, int ell, bool global) {
    IterationRecord r;
    r.n = static_cast<std::size_t>(model_.size());
    r.train_index = s.train_index;
    r.delta_max = s.delta_max;
    r.domain_size = domain_size;
    r.cum_estimator_evals = counters().snapshot().estimator_evals - evals0_;
    r.cum_wall_ms = ms_since(t0_);
    r.ell = ell;
    r.global = global;
    trace_.iterations.push_back(r);
    if (config_.on_iteration) config_.on_iteration(r);
    if (global) {
      trace_.global_sweep_evals += domain_size;
      ++trace_.global_sweeps;
      trace_.final_global_delta_max = s.delta_max;
    }
  }

  void mark_accepted() { trace_.iterations.back().accepted = true; }

  bool can_grow() const { return static_cast<std::size_t>(model_.size()) < config_.n_max; }

  void remove_active(std::size_t idx) {
    auto it = std::lower_bound(active_.begin(), active_.end(), idx);
    if (it != active_.end() && *it == idx) active_.erase(it);
  }

  GreedyResult<Op> finish() {
    // Every training point is a snapshot or numerically in the span.
    if (active_.empty()) trace_.converged = true;
    trace_.total_wall_ms = ms_since(t0_);
    trace_.estimator_evals = counters().snapshot().estimator_evals - evals0_;
    return {std::move(model_), std::move(trace_)};
  }

  const TruthModel<Op>& truth_;
  const TrainingSet& train_;
  const GreedyConfig& config_;
  ReducedModel<Op> model_;
  GreedyTrace trace_;
  std::vector<std::size_t> active_;  // sorted; excludes snapshots and rejected points
  FactorizationCache<Op> cache_;
  std::size_t cache_first_ = 0;
  std::uint64_t evals0_ = 0;
  Clock::time_point t0_;
};

}  // namespace detail

/// Weak greedy over the full training set until the global maximum of the
/// estimator is <= eps_tol or N reaches n_max.
template <class Op>
GreedyResult<Op> classical_greedy(const TruthModel<Op>& truth, const TrainingSet& train, const GreedyConfig& config) {
  detail::GreedyState<Op> st(truth, train, config, Method::classical);
  st.seed();
  while (st.can_grow() && !st.active_.empty()) {
    const SweepResult s = st.sweep(st.active_, false);
    st.record(s, st.active_.size(), 0, true);
    if (s.delta_max <= config.eps_tol) {
      st.trace_.converged = true;
      break;
    }
    if (st.add_snapshot(s.train_index)) st.mark_accepted();
  }
  return st.finish();
}

/// Offline-enhanced greedy: each outer loop runs one global sweep, adds its
/// maximizer, builds a surrogate domain from that sweep and then greedily
/// sweeps the surrogate while eps > eps_tol and eps > E_l / (K_damp (l+1)).
/// Terminates only on a global sweep with maximum <= eps_tol (or n_max).
template <class Op>
GreedyResult<Op> offline_enhanced_greedy(const TruthModel<Op>& truth, const TrainingSet& train,
                                         const GreedyConfig& config, SpdConstructor<Op>& spd) {
  if (config.method == Method::classical || spd.method() != config.method)
    throw ConfigError("SPD constructor does not match the configured method");
  detail::GreedyState<Op> st(truth, train, config, config.method);
  st.seed();
  int ell = 0;
  while (st.can_grow() && !st.active_.empty()) {
    ++ell;
    const std::vector<std::size_t> domain = st.active_;
    const SweepResult s = st.sweep(domain, spd.needs_coefficients());
    st.record(s, domain.size(), ell, true);
    OuterLoopRecord outer;
    outer.ell = ell;
    outer.e_ell = s.delta_max;
    if (s.delta_max <= config.eps_tol) {
      st.trace_.converged = true;
      break;
    }

    // The surrogate is built from this sweep (estimates for the basis the
    // sweep was evaluated with), before the maximizer joins the basis.
    const auto t_spd = detail::Clock::now();
    const std::size_t budget = config.m_schedule(ell);
    if (budget < 1) throw ConfigError("m_schedule must return >= 1");
    const SpdContext<Op> ctx{st.model_, train, domain, s, ell, budget, config, st.cache_};
    SurrogateDomain sur = spd.construct(ctx);
    st.trace_.spd_ms += detail::ms_since(t_spd);
    outer.m_ell = budget;
    outer.surrogate_size = sur.indices.size();

    const bool added = st.add_snapshot(s.train_index);
    if (added) st.mark_accepted();

    std::vector<std::size_t> pool;
    for (std::size_t i : sur.indices)
      if (std::binary_search(st.active_.begin(), st.active_.end(), i)) pool.push_back(i);

    double eps = s.delta_max;
    const double damp = damping_threshold(s.delta_max, config.k_damp, ell);
    while (eps > config.eps_tol && eps > damp && !pool.empty() && st.can_grow()) {
      const SweepResult t = st.sweep(pool, false);
      st.record(t, pool.size(), ell, false);
      eps = t.delta_max;
      if (eps <= config.eps_tol) break;
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(t.position));
      if (st.add_snapshot(t.train_index)) {
        st.mark_accepted();
        ++outer.n_ell;
      }
    }
    st.trace_.outer.push_back(outer);
  }
  return st.finish();
}

/// Per outer loop (l, N_l / M_l).
inline std::vector<std::pair<int, double>> surrogate_acceptance_ratio(const GreedyTrace& trace) {
  std::vector<std::pair<int, double>> out;
  for (const auto& o : trace.outer) out.emplace_back(o.ell, o.sar());
  return out;
}

}  // namespace rbx
