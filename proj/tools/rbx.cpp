#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rbx/harness/config.hpp"
#include "rbx/harness/experiment.hpp"
#include "rbx/harness/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir, std::size_t workers, bool dump) {
  using namespace rbx::harness;
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const rbx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (workers > 0) cfg.workers = workers;
  if (dump) cfg.dump_matrices = true;
  try {
    const ExperimentResult r = run_experiment(cfg, &std::cerr);
    std::cout << r.summary["methods"].dump(2) << "\n";
    std::cout << "wrote " << r.dir.string() << "\n";
  } catch (const rbx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_verify(bool quick) {
  bool ok = true;
  try {
    for (const auto& c : rbx::harness::run_verification(quick)) {
      std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
      ok = ok && c.passed;
    }
  } catch (const std::exception& e) {
    std::cerr << "verification aborted: " << e.what() << "\n";
    return kExitFailure;
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_problems() {
  std::cout << "diffusion2d    (1 + mu1 x) u_xx + (1 + mu2 y) u_yy = exp(4xy) on [-1,1]^2, u = 0 on the boundary\n"
               "               Chebyshev collocation; keys: n_x (default 35); mu in [-0.99,0.99]^2\n"
               "               default training: 160 x 160 grid; eps_tol 1e-6\n"
               "thermalblock   -div(mu_b grad u) = 0 on 3x3 blocks of the unit square, u = 0 on top, du/dn = 1 at the base\n"
               "               P1 finite elements; keys: nodes_per_side (default 19); mu in [0.1,10]^9\n"
               "               default training: 20000 random points; eps_tol 1e-5\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified reduced basis construction with offline-enhanced greedy sampling"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t workers = 0;
  bool dump = false;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--workers", workers, "Sweep worker threads (default 1)")->check(CLI::PositiveNumber);
  run->add_flag("--dump-matrices", dump, "Write the truth matrices in Matrix Market format");

  bool quick = false;
  auto* verify = app.add_subcommand("verify", "Run the oracle suites");
  verify->add_flag("--quick", quick, "Smaller problem sizes and sample counts");

  auto* problems = app.add_subcommand("problems", "List the built-in problems");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config_path, out_dir, workers, dump);
  if (*verify) return cmd_verify(quick);
  if (*problems) return cmd_problems();
  return kExitConfig;
}
