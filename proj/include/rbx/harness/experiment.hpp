#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <unsupported/Eigen/SparseExtra>

#include "rbx/greedy.hpp"
#include "rbx/harness/config.hpp"
#include "rbx/truth/diffusion2d.hpp"
#include "rbx/truth/thermal_block.hpp"
#include "rbx/version.hpp"

namespace rbx::harness {

namespace fs = std::filesystem;

using AnyTruth = std::variant<TruthModel<DenseMatrix>, TruthModel<SparseMatrix>>;

inline AnyTruth build_truth(const ProblemSpec& p) {
  if (p.kind == ProblemKind::diffusion2d) return build_diffusion2d(p.n_x);
  return build_thermal_block(p.nodes_per_side);
}

inline Json counters_json(const CounterSnapshot& c) {
  return {{"truth_solves", c.truth_solves},
          {"riesz_solves", c.riesz_solves},
          {"estimator_evals", c.estimator_evals},
          {"reduced_solves", c.reduced_solves},
          {"cholesky_steps", c.cholesky_steps},
          {"approx_error_evals", c.approx_error_evals},
          {"truth_dim_ops", c.truth_dim_ops},
          {"conditioning_warnings", c.conditioning_warnings}};
}

/// Current process-wide cost counters.
inline Json cost_counters() { return counters_json(counters().snapshot()); }

struct MethodRun {
  MethodSpec spec;
  GreedyTrace trace;             // first repetition
  Index final_n = 0;
  DenseMatrix snapshot_params;   // p x N, selection order
  std::vector<double> wall_ms;   // one per repetition
  CounterSnapshot cost;          // first repetition

  double median_wall_ms() const {
    std::vector<double> v = wall_ms;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
};

struct CostRatioCheck {
  double measured = 0.0;
  double bound = 0.0;
  int ell = 0;
  Index n_classical = 0;
  std::size_t m_max = 0;
  std::size_t n_train = 0;
  bool passed = false;
};

/// Enhanced/classical estimator evaluations against l/N + M_max/N_train + 0.05,
/// with l the enhanced run's outer loop count and N the classical final N.
inline CostRatioCheck cost_ratio_check(const MethodRun& classical, const MethodRun& enhanced, std::size_t n_train) {
  CostRatioCheck c;
  c.ell = static_cast<int>(enhanced.trace.global_sweeps);
  c.n_classical = classical.final_n;
  for (const auto& o : enhanced.trace.outer) c.m_max = std::max(c.m_max, o.m_ell);
  c.n_train = n_train;
  c.measured = static_cast<double>(enhanced.trace.estimator_evals) /
               static_cast<double>(std::max<std::uint64_t>(1, classical.trace.estimator_evals));
  c.bound = static_cast<double>(c.ell) / static_cast<double>(std::max<Index>(1, c.n_classical)) +
            static_cast<double>(c.m_max) / static_cast<double>(n_train) + 0.05;
  c.passed = c.measured <= c.bound;
  return c;
}

inline double mean_sar(const GreedyTrace& t) {
  if (t.outer.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : t.outer) s += o.sar();
  return s / static_cast<double>(t.outer.size());
}

template <class Op>
MethodRun run_method(const TruthModel<Op>& truth, const TrainingSet& train, const ExperimentConfig& cfg,
                     const MethodSpec& spec) {
  MethodRun run;
  run.spec = spec;
  const GreedyConfig g = greedy_config(cfg, spec);
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    counters().reset();
    std::optional<GreedyResult<Op>> res;
    if (spec.method == Method::classical) {
      res.emplace(classical_greedy(truth, train, g));
    } else if (spec.method == Method::smm) {
      SmmConstructor<Op> spd;
      res.emplace(offline_enhanced_greedy(truth, train, g, spd));
    } else {
      CdmConstructor<Op> spd;
      res.emplace(offline_enhanced_greedy(truth, train, g, spd));
    }
    run.wall_ms.push_back(res->trace.total_wall_ms);
    if (rep == 0) {
      run.cost = counters().snapshot();
      run.final_n = res->model.size();
      run.snapshot_params = res->model.snapshot_params();
      run.trace = std::move(res->trace);
    }
  }
  return run;
}

struct ExperimentResult {
  fs::path dir;
  std::vector<MethodRun> runs;
  std::size_t n_train = 0;
  Json summary;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string header(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# rbx " << kVersion << "\n";
  os << "# config: " << cfg.source.dump() << "\n";
  os << "# seed: " << cfg.seed << "\n";
  return os.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw ResourceError("write to '" + path.string() + "' failed");
}

template <class Op>
void dump_matrices(const TruthModel<Op>& truth, const fs::path& dir) {
  fs::create_directories(dir);
  auto save = [&](const auto& m, const std::string& name) {
    SparseMatrix s;
    if constexpr (is_sparse_v<std::decay_t<decltype(m)>>) s = m;
    else s = m.sparseView();
    if (!Eigen::saveMarket(s, (dir / name).string())) throw ResourceError("cannot write " + name);
  };
  const auto& p = truth.problem;
  for (std::size_t q = 0; q < p.components.size(); ++q) save(p.components[q], "A" + std::to_string(q + 1) + ".mtx");
  save(truth.disc.x_inner(), "x_inner.mtx");
  if (!Eigen::saveMarketVector(p.rhs, (dir / "rhs.mtx").string())) throw ResourceError("cannot write rhs.mtx");
  if (!Eigen::saveMarketVector(p.output, (dir / "output.mtx").string())) throw ResourceError("cannot write output.mtx");
}

}  // namespace detail

inline constexpr const char* kIncompleteMarker = "INCOMPLETE";

/// Runs every configured method sequentially and writes convergence.csv,
/// sar.csv, snapshots.csv and summary.json into the output directory. An
/// INCOMPLETE marker exists for the whole run and is removed only after
/// every file was written.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  ExperimentResult result;
  result.dir = cfg.output_dir;
  const fs::path marker = result.dir / kIncompleteMarker;
  try {
    fs::create_directories(result.dir);
  } catch (const fs::filesystem_error& e) {
    throw ResourceError(std::string("cannot create output directory: ") + e.what());
  }
  detail::write_file(marker, "run started\n");

  try {
    const AnyTruth truth = build_truth(cfg.problem);
    std::visit(
        [&](const auto& t) {
          const TrainingSet train = sample_training_set(t.problem.box, cfg.training);
          result.n_train = train.size();
          if (cfg.dump_matrices) detail::dump_matrices(t, result.dir / "matrices");
          for (const auto& spec : cfg.methods) {
            if (log) *log << "[rbx] " << to_string(spec.method) << " on " << t.problem.name << " (" << train.size()
                          << " training points)" << std::endl;
            result.runs.push_back(run_method(t, train, cfg, spec));
            if (log) {
              const auto& r = result.runs.back();
              *log << "[rbx]   N = " << r.final_n << ", " << detail::fmt(r.median_wall_ms()) << " ms, "
                   << r.trace.estimator_evals << " estimator evaluations" << std::endl;
            }
          }
        },
        truth);

    const std::string head = detail::header(cfg);
    std::ostringstream conv, sar, snaps;
    conv << head << "method,n,delta_max,cum_estimator_evals,cum_wall_ms\n";
    sar << head << "method,ell,E_ell,M_ell,N_ell,sar\n";
    snaps << head << "method,order";
    const Index p = result.runs.empty() ? 0 : result.runs.front().snapshot_params.rows();
    for (Index d = 0; d < p; ++d) snaps << ",mu" << (d + 1);
    snaps << "\n";
    for (const auto& r : result.runs) {
      const std::string m = to_string(r.spec.method);
      for (const auto& it : r.trace.iterations)
        conv << m << ',' << it.n << ',' << detail::fmt(it.delta_max) << ',' << it.cum_estimator_evals << ','
             << detail::fmt(it.cum_wall_ms) << "\n";
      for (const auto& o : r.trace.outer)
        sar << m << ',' << o.ell << ',' << detail::fmt(o.e_ell) << ',' << o.m_ell << ',' << o.n_ell << ','
            << detail::fmt(o.sar()) << "\n";
      for (Index k = 0; k < r.snapshot_params.cols(); ++k) {
        snaps << m << ',' << (k + 1);
        for (Index d = 0; d < p; ++d) snaps << ',' << detail::fmt(r.snapshot_params(d, k));
        snaps << "\n";
      }
    }

    Json summary;
    summary["header"] = {{"rbx_version", kVersion}, {"config", cfg.source}, {"seed", cfg.seed}};
    summary["problem"] = to_string(cfg.problem.kind);
    summary["n_train"] = result.n_train;
    summary["repetitions"] = cfg.repetitions;
    summary["workers"] = cfg.workers;
    const MethodRun* classical = nullptr;
    for (const auto& r : result.runs)
      if (r.spec.method == Method::classical) classical = &r;
    Json methods = Json::object();
    for (const auto& r : result.runs) {
      Json j;
      j["final_n"] = r.final_n;
      j["converged"] = r.trace.converged;
      j["eps_tol"] = r.spec.eps_tol;
      j["final_global_delta_max"] = r.trace.final_global_delta_max;
      j["total_wall_ms"] = r.median_wall_ms();
      j["wall_ms_repetitions"] = r.wall_ms;
      j["snapshot_solve_ms"] = r.trace.snapshot_solve_ms;
      j["spd_ms"] = r.trace.spd_ms;
      j["estimator_evals"] = r.trace.estimator_evals;
      j["global_sweeps"] = r.trace.global_sweeps;
      j["global_sweep_evals"] = r.trace.global_sweep_evals;
      j["skipped"] = r.trace.skipped.size();
      j["counters"] = counters_json(r.cost);
      if (r.spec.method != Method::classical) {
        j["outer_loops"] = r.trace.global_sweeps;
        j["mean_sar"] = mean_sar(r.trace);
        j["k_damp"] = r.spec.k_damp;
        j["m_factor"] = r.spec.m_factor;
      }
      if (classical && r.spec.method != Method::classical) {
        j["speedup"] = classical->median_wall_ms() / r.median_wall_ms();
        const CostRatioCheck c = cost_ratio_check(*classical, r, result.n_train);
        j["cost_ratio"] = {{"measured", c.measured}, {"bound", c.bound},     {"ell", c.ell},
                           {"n_classical", c.n_classical}, {"m_max", c.m_max}, {"n_train", c.n_train},
                           {"passed", c.passed}};
      }
      methods[to_string(r.spec.method)] = j;
    }
    summary["methods"] = methods;
    result.summary = summary;

    detail::write_file(result.dir / "convergence.csv", conv.str());
    detail::write_file(result.dir / "sar.csv", sar.str());
    detail::write_file(result.dir / "snapshots.csv", snaps.str());
    detail::write_file(result.dir / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    try {
      detail::write_file(marker, std::string("run aborted: ") + e.what() + "\n");
    } catch (...) {
    }
    throw;
  }
  fs::remove(marker);
  return result;
}

}  // namespace rbx::harness
