// clip-lab: command-line front end for experiments, sweeps, verification
// suites, landscape profiling and the limiting-loss oracles.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "cliplab/harness/config.hpp"
#include "cliplab/harness/experiment.hpp"
#include "cliplab/harness/verify.hpp"
#include "cliplab/harness/workers.hpp"
#include "cliplab/theory.hpp"

namespace {

using namespace cliplab;
using namespace cliplab::harness;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitViolation = 2;
constexpr int kExitRuntime = 3;

int fail(int code, const std::string& msg) {
  std::cerr << "clip-lab: " << msg << "\n";
  return code;
}

// Config problems are usage errors; everything after loading is a runtime failure.
template <typename Fn>
int with_config(const std::string& name, Fn&& fn) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(resolve_preset(name));
  } catch (const std::exception& e) {
    return fail(kExitUsage, e.what());
  }
  try {
    return fn(cfg);
  } catch (const Error& e) {
    return fail(kExitRuntime, std::string(to_string(e.kind())) + ": " + e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clipped-momentum optimization lab"};
  app.require_subcommand(1);

  std::string config_arg;
  std::string output_override;

  auto* run = app.add_subcommand("run", "Run an experiment config or preset");
  run->add_option("config", config_arg, "Config file or preset name")->required();
  run->add_option("-o,--output", output_override, "Override output.dir");

  std::string grid_spec;
  auto* sw = app.add_subcommand("sweep", "Cartesian sweep over config fields");
  sw->add_option("config", config_arg, "Config file or preset name")->required();
  sw->add_option("--grid", grid_spec, "e.g. optimizer.eta=0.1,0.2;optimizer.nu=0,1")->required();
  sw->add_option("-o,--output", output_override, "Override output.dir");

  std::string suite;
  double scale = 1.0;
  std::string report_path;
  std::uint64_t verify_seed = 2020;
  auto* ver = app.add_subcommand("verify", "Run property suites; exit 2 on any violation");
  ver->add_option("suite", suite, "lemmas | oracles | equivalences | envelope | all")->required();
  ver->add_option("--scale-constants", scale, "Multiply certified (L0, L1) by this factor");
  ver->add_option("--report", report_path, "Also write the report CSV here");
  ver->add_option("--seed", verify_seed, "Base seed for sampled checks");

  bool grid_mode = false;
  bool traj_mode = false;
  auto* prof = app.add_subcommand("profile", "Sample (grad norm, Hessian norm) and fit (L0, L1)");
  prof->add_option("config", config_arg, "Config file or preset name")->required();
  auto* grid_flag = prof->add_flag("--grid", grid_mode, "Sample the smoothness grid");
  auto* traj_flag = prof->add_flag("--trajectory", traj_mode, "Sample the first seed's iterates");
  grid_flag->excludes(traj_flag);
  prof->add_option("-o,--output", output_override, "Override output.dir");

  double eta = 0.0, beta = 0.0, nu = 0.0;
  int mc_seeds = 0;
  std::int64_t mc_steps = 10000, burn_in = 2000, matrix_steps = 100000;
  auto* lim = app.add_subcommand("limit", "Limiting E[x^2/2] on the noisy quadratic");
  lim->add_option("--eta", eta)->required();
  lim->add_option("--beta", beta)->required();
  lim->add_option("--nu", nu)->required();
  lim->add_option("--mc-seeds", mc_seeds, "Also run a Monte-Carlo estimate with N seeds");
  lim->add_option("--mc-steps", mc_steps, "Steps per Monte-Carlo run");
  lim->add_option("--burn-in", burn_in, "Steps discarded before averaging");
  lim->add_option("--matrix-steps", matrix_steps, "Moment-recursion iterations");

  auto* show = app.add_subcommand("show", "Print the canonical form of a config");
  show->add_option("config", config_arg, "Config file or preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  const std::size_t workers = worker_count();

  if (*run) {
    return with_config(config_arg, [&](ExperimentConfig cfg) {
      if (!output_override.empty()) cfg.output.dir = output_override;
      const auto res = run_experiment(cfg, workers);
      std::cout << res.aggregate.to_string();
      for (const auto& s : res.seeds) {
        if (!s.error.empty()) std::cerr << "seed " << s.plan.seed << ": " << s.error << "\n";
      }
      return res.exit_code == 0 ? kExitOk : kExitRuntime;
    });
  }
  if (*sw) {
    return with_config(config_arg, [&](ExperimentConfig cfg) {
      if (!output_override.empty()) cfg.output.dir = output_override;
      GridSpec grid;
      try {
        grid = parse_grid(grid_spec);
        for (const auto& [key, values] : grid) (void)with_override(cfg, key, values.front());
      } catch (const std::exception& e) {
        return fail(kExitUsage, e.what());
      }
      const auto res = sweep(cfg, grid, workers);
      std::cout << res.table.to_string();
      return res.exit_code == 0 ? kExitOk : kExitRuntime;
    });
  }
  if (*ver) {
    if (!(scale > 0.0)) return fail(kExitUsage, "--scale-constants must be > 0");
    try {
      VerifyOptions opts;
      opts.scale_constants = scale;
      opts.workers = workers;
      opts.seed = verify_seed;
      const auto rows = verify_suite(suite, opts);
      const auto table = report_table(rows);
      std::cout << table.to_string();
      if (!report_path.empty()) table.write(report_path);
      for (const auto& r : rows) {
        if (!r.passed()) return kExitViolation;
      }
      return kExitOk;
    } catch (const Error& e) {
      return fail(e.kind() == ErrorKind::invalid_input ? kExitUsage : kExitRuntime, e.what());
    } catch (const std::exception& e) {
      return fail(kExitRuntime, e.what());
    }
  }
  if (*prof) {
    if (!grid_mode && !traj_mode) return fail(kExitUsage, "profile needs --grid or --trajectory");
    return with_config(config_arg, [&](ExperimentConfig cfg) {
      if (!output_override.empty()) cfg.output.dir = output_override;
      const auto res = profile(cfg, traj_mode, workers);
      std::cout << res.envelope.to_string();
      return kExitOk;
    });
  }
  if (*lim) {
    try {
      CsvTable t({"eta", "beta", "nu", "closed_form", "matrix_oracle", "mc_mean", "mc_std_err",
                  "mc_seeds"});
      const double closed = qhm_limit_closed_form(eta, beta, nu);
      const double matrix = qhm_limit_matrix_oracle(eta, beta, nu, matrix_steps);
      double mean = std::nan(""), se = std::nan("");
      if (mc_seeds > 0) {
        const auto est = qhm_limit_monte_carlo(eta, beta, nu, mc_steps, mc_seeds, burn_in);
        mean = est.mean;
        se = est.std_err;
      }
      t.add_row({cell(eta), cell(beta), cell(nu), cell(closed), cell(matrix), cell(mean), cell(se),
                 cell(mc_seeds)});
      std::cout << t.to_string();
      return kExitOk;
    } catch (const Error& e) {
      const bool usage = e.kind() == ErrorKind::invalid_input || e.kind() == ErrorKind::precondition;
      return fail(usage ? kExitUsage : kExitRuntime, e.what());
    }
  }
  if (*show) {
    return with_config(config_arg, [&](const ExperimentConfig& cfg) {
      std::cout << serialize_config(cfg);
      return kExitOk;
    });
  }
  return kExitUsage;
}
