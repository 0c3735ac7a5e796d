// Full-scale acceptance run: one PASS/FAIL line per criterion, nonzero exit
// if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rbx/harness/config.hpp"
#include "rbx/harness/experiment.hpp"
#include "rbx/harness/verify.hpp"

using namespace rbx;
using namespace rbx::harness;

namespace {

constexpr std::uint64_t kSeed = 20240611;

template <class Op>
struct ProblemRuns {
  const TruthModel<Op>* truth = nullptr;
  std::size_t n_train = 0;
  double eps_tol = 0.0;
  std::vector<MethodRun> runs;
  std::vector<ReducedModel<Op>> models;

  const MethodRun& get(Method m) const {
    for (const auto& r : runs)
      if (r.spec.method == m) return r;
    throw std::logic_error("method not run");
  }
  const ReducedModel<Op>& model(Method m) const {
    for (std::size_t k = 0; k < runs.size(); ++k)
      if (runs[k].spec.method == m) return models[k];
    throw std::logic_error("method not run");
  }
};

template <class Op>
ProblemRuns<Op> run_all(const TruthModel<Op>& truth, const ExperimentConfig& cfg) {
  ProblemRuns<Op> out;
  out.truth = &truth;
  const TrainingSet train = sample_training_set(truth.problem.box, cfg.training);
  out.n_train = train.size();
  for (const auto& spec : cfg.methods) {
    out.eps_tol = spec.eps_tol;
    GreedyConfig g = greedy_config(cfg, spec);
    std::fprintf(stderr, "[acceptance] %s on %s (%zu training points)\n", to_string(spec.method).c_str(),
                 truth.problem.name.c_str(), train.size());
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
    MethodRun r;
    r.spec = spec;
    r.cost = counters().snapshot();
    r.final_n = res->model.size();
    r.snapshot_params = res->model.snapshot_params();
    r.wall_ms = {res->trace.total_wall_ms};
    r.trace = std::move(res->trace);
    std::fprintf(stderr, "[acceptance]   N = %ld, %.1f s, %llu estimator evaluations, converged %d\n",
                 static_cast<long>(r.final_n), r.wall_ms[0] / 1000.0,
                 static_cast<unsigned long long>(r.trace.estimator_evals), r.trace.converged ? 1 : 0);
    out.runs.push_back(std::move(r));
    out.models.push_back(std::move(res->model));
  }
  return out;
}

struct Report {
  int failures = 0;
  void line(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
    if (!pass) ++failures;
  }
};

// Least-squares fit of log10(delta_max) against n over n = 3..N.
std::pair<double, double> log_fit(const GreedyTrace& t) {
  std::vector<double> xs, ys;
  for (const auto& it : t.iterations)
    if (it.n >= 3 && it.delta_max > 0.0) {
      xs.push_back(static_cast<double>(it.n));
      ys.push_back(std::log10(it.delta_max));
    }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 0.0;
  return {slope, r2};
}

template <class Op>
double worst_reproduction(const ProblemRuns<Op>& p) {
  const ReducedModel<Op> empty(*p.truth);
  double worst = 0.0;
  for (const auto& m : p.models)
    for (Index j = 0; j < m.size(); ++j) {
      const Parameter mu = m.snapshot_params().col(j);
      worst = std::max(worst, error_estimate(m, mu) / error_estimate(empty, mu));
    }
  return worst;
}

}  // namespace

int main() {
  Report rep;
  using Clock = std::chrono::steady_clock;
  auto secs = [](Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  // Defaults: problem 1 n_x 35, 160^2 grid, eps_tol 1e-6; problem 2 19 nodes
  // per side, 20000 random points, eps_tol 1e-5; single worker.
  const ExperimentConfig cfg1 = parse_config_text(R"({"problem":{"name":"diffusion2d"},"seed":0})");
  const ExperimentConfig cfg2 =
      parse_config_text(R"({"problem":{"name":"thermalblock"},"training":{"kind":"random","seed":1},"seed":0})");
  const auto truth1 = build_diffusion2d(cfg1.problem.n_x);
  const auto truth2 = build_thermal_block(cfg2.problem.nodes_per_side);
  const auto p1 = run_all(truth1, cfg1);
  const auto p2 = run_all(truth2, cfg2);

  {
    const auto& c = p1.get(Method::classical);
    const auto [slope, r2] = log_fit(c.trace);
    const double minutes = c.trace.total_wall_ms / 60000.0;
    std::ostringstream os;
    os << "N = " << c.final_n << ", slope " << slope << " per snapshot, R^2 " << r2 << ", " << minutes << " min";
    rep.line(1, "problem 1 classical exponential convergence", c.trace.converged && r2 >= 0.95 && slope < 0.0 &&
                                                                   minutes <= 10.0,
             os.str());
  }

  {
    bool ok = true;
    std::ostringstream os;
    auto check = [&](const auto& p, const char* name) {
      const auto nc = p.get(Method::classical).final_n;
      for (Method m : {Method::smm, Method::cdm}) {
        const auto& r = p.get(m);
        const bool good = r.trace.converged && r.trace.final_global_delta_max <= p.eps_tol &&
                          std::abs(static_cast<double>(r.final_n - nc)) <= 0.2 * static_cast<double>(nc);
        ok = ok && good;
        os << name << ' ' << to_string(m) << " N=" << r.final_n << " (classical " << nc << ") max "
           << r.trace.final_global_delta_max << "; ";
      }
    };
    check(p1, "p1");
    check(p2, "p2");
    rep.line(2, "no accuracy degradation", ok, os.str());
  }

  {
    const double tc = p2.get(Method::classical).median_wall_ms();
    const double s_smm = tc / p2.get(Method::smm).median_wall_ms();
    const double s_cdm = tc / p2.get(Method::cdm).median_wall_ms();
    std::ostringstream os;
    os << "smm " << s_smm << "x, cdm " << s_cdm << "x (classical " << tc / 1000.0 << " s)";
    rep.line(3, "problem 2 speedup >= 1.5", s_smm >= 1.5 && s_cdm >= 1.5, os.str());
  }

  {
    bool ok = true;
    std::ostringstream os;
    auto check = [&](const auto& p, const char* name) {
      for (Method m : {Method::smm, Method::cdm}) {
        const CostRatioCheck c = cost_ratio_check(p.get(Method::classical), p.get(m), p.n_train);
        ok = ok && c.passed;
        os << name << ' ' << to_string(m) << ' ' << c.measured << " <= " << c.bound << "; ";
      }
    };
    check(p1, "p1");
    check(p2, "p2");
    rep.line(4, "sweep-cost ratio bound", ok, os.str());
  }

  {
    const double s1 = mean_sar(p1.get(Method::smm).trace);
    const double s2 = mean_sar(p2.get(Method::cdm).trace);
    std::ostringstream os;
    os << "smm p1 " << s1 << " in [0.2, 0.65]; cdm p2 " << s2 << " in [0.15, 0.55]"
       << " (cdm p1 " << mean_sar(p1.get(Method::cdm).trace) << ", smm p2 " << mean_sar(p2.get(Method::smm).trace)
       << ")";
    rep.line(5, "mean SAR bands", s1 >= 0.2 && s1 <= 0.65 && s2 >= 0.15 && s2 <= 0.55, os.str());
  }

  {
    const auto t0 = Clock::now();
    const CheckResult a = check_residual_equivalence(truth1, 50, 10, kSeed);
    const CheckResult b = check_residual_equivalence(truth2, 50, 10, kSeed + 1);
    const double s = secs(t0);
    rep.line(6, "offline-online residual equivalence", a.passed && b.passed && s <= 60.0,
             a.detail + "; " + b.detail + "; " + std::to_string(s) + " s");
  }

  {
    const CheckResult r = check_bound_certification(truth2, {2, 5, 10}, 100, kSeed + 2);
    rep.line(7, "certified bound, thermal block min-theta", r.passed, r.detail);
  }

  {
    const CheckResult r = check_pivoted_cholesky(20, 30, kSeed + 3);
    rep.line(8, "pivoted Cholesky vs brute force", r.passed, r.detail);
  }

  {
    const CheckResult r = check_smm_property(200, kSeed + 4);
    rep.line(9, "SMM property", r.passed, r.detail);
  }

  {
    const double w1 = worst_reproduction(p1);
    const double w2 = worst_reproduction(p2);
    std::ostringstream os;
    os << "worst Delta_N/Delta_0 at snapshots: p1 " << w1 << ", p2 " << w2 << " (all greedy models)";
    rep.line(10, "reproduction at snapshots", w1 <= 1e-8 && w2 <= 1e-8, os.str());
  }

  std::cout << (rep.failures == 0 ? "all criteria passed" : std::to_string(rep.failures) + " criteria failed")
            << std::endl;
  return rep.failures == 0 ? 0 : 1;
}
