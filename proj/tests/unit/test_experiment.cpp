#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "cliplab/harness/config.hpp"
#include "cliplab/harness/csv.hpp"
#include "cliplab/harness/experiment.hpp"
#include "cliplab/harness/verify.hpp"
#include "cliplab/harness/workers.hpp"
#include "support.hpp"

using namespace cliplab;
using namespace cliplab::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quadratic(const std::string& dir) {
  auto c = parse_config(R"(
name: q
objective: {kind: noisy_quadratic}
optimizer: {eta: 0.5, gamma: 1.0, beta: 0.5, nu: 0.7}
init: {x0: [2], m0: [0]}
run: {steps: 200, stochastic: true, burn_in: 100}
seeds: [1, 2, 3]
)");
  c.output.dir = dir;
  return c;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("real formatting round-trips") {
  CHECK(format_real(0.5) == "0.5");
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(std::nan("")) == "nan");
  CHECK(format_real(-INFINITY) == "-inf");
  RngStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    CHECK(std::stod(format_real(v)) == v);
  }
}

TEST_CASE("csv tables") {
  CsvTable t({"a", "b"});
  t.add_row({cell(1), cell(0.25)});
  CHECK(t.to_string() == "a,b\n1,0.25\n");
  CHECK_THROWS_AS(t.add_row({"1"}), Error);
  cliplab::testing::TempDir dir("csv");
  const auto path = dir.path() / "nested" / "t.csv";
  t.write(path);
  CHECK(read_file(path) == t.to_string());
}

TEST_CASE("record stride") {
  CHECK(record_stride(1) == 1);
  CHECK(record_stride(100000) == 1);
  CHECK(record_stride(100001) == 2);
  CHECK(record_stride(1000000) == 10);
}

TEST_CASE("run writes per-seed trajectories and summaries") {
  cliplab::testing::TempDir dir("run");
  const auto cfg = quadratic(dir.str("out"));
  const auto res = run_experiment(cfg, 2);
  CHECK(res.exit_code == 0);
  REQUIRE(res.seeds.size() == 3);
  for (std::uint64_t s : {1, 2, 3}) {
    const auto traj = read_file(fs::path(cfg.output.dir) / ("trajectory_seed" + std::to_string(s) + ".csv"));
    CHECK(traj.rfind("t,loss,grad_norm,lyapunov,step_norm\n", 0) == 0);
    CHECK(line_count(traj) == 202);
  }
  const auto summary = read_file(fs::path(cfg.output.dir) / "summary.csv");
  CHECK(line_count(summary) == 4);
  CHECK(summary.rfind("seed,steps,eta,gamma,beta,nu,mode,", 0) == 0);
  CHECK(fs::exists(fs::path(cfg.output.dir) / "aggregate.csv"));
  CHECK_FALSE(fs::exists(fs::path(cfg.output.dir) / "errors.csv"));

  // Same seeds, fewer workers: identical files.
  auto again = cfg;
  again.output.dir = dir.str("again");
  run_experiment(again, 1);
  for (const auto& e : fs::directory_iterator(cfg.output.dir)) {
    CHECK(read_file(e.path()) == read_file(fs::path(again.output.dir) / e.path().filename()));
  }
}

TEST_CASE("full records include coordinates and none records skip trajectories") {
  cliplab::testing::TempDir dir("records");
  auto cfg = quadratic(dir.str("full"));
  cfg.output.record = "full";
  run_experiment(cfg, 1);
  CHECK(read_file(fs::path(cfg.output.dir) / "trajectory_seed1.csv").rfind("t,loss,grad_norm,lyapunov,step_norm,x0\n", 0) == 0);
  cfg.output.dir = dir.str("none");
  cfg.output.record = "none";
  run_experiment(cfg, 1);
  CHECK_FALSE(fs::exists(fs::path(cfg.output.dir) / "trajectory_seed1.csv"));
  CHECK(fs::exists(fs::path(cfg.output.dir) / "summary.csv"));
}

TEST_CASE("runtime failures leave an error manifest") {
  cliplab::testing::TempDir dir("fail");
  auto cfg = parse_config(R"(
objective: {kind: quartic}
optimizer: {eta: 10, gamma: .inf}
init: {x0: [10]}
run: {steps: 100}
seeds: [1]
)");
  cfg.output.dir = dir.str("out");
  const auto res = run_experiment(cfg, 1);
  CHECK(res.exit_code == 3);
  const auto errors = read_file(fs::path(cfg.output.dir) / "errors.csv");
  CHECK(errors.rfind("seed,kind,message\n", 0) == 0);
  CHECK(fs::exists(fs::path(cfg.output.dir) / "summary.csv"));
}

TEST_CASE("auto schedule on the quartic meets its guarantee") {
  auto cfg = load_config(resolve_preset("quartic-det"));
  cfg.seeds = {1, 2};
  cfg.output.record = "none";
  const auto res = run_experiment(cfg, 1, false);
  REQUIRE(res.smoothness);
  CHECK(res.smoothness->source == "fit");
  for (const auto& s : res.seeds) {
    REQUIRE(s.trajectory);
    CHECK(s.trajectory->summary.avg_grad_norm() <= 0.1);
  }
}

TEST_CASE("preset appendixE-nu0 reaches its limit") {
  auto cfg = load_config(resolve_preset("appendixE-nu0"));
  const auto res = run_experiment(cfg, worker_count(), false);
  double mean = 0.0;
  for (const auto& s : res.seeds) mean += s.trajectory->summary.tail_loss_mean;
  mean /= static_cast<double>(res.seeds.size());
  CHECK(std::abs(mean - 1.0 / 6.0) / (1.0 / 6.0) < 0.05);
}

TEST_CASE("grid parsing") {
  const auto g = parse_grid("optimizer.eta=0.1,0.2;optimizer.nu=0,1");
  REQUIRE(g.size() == 2);
  CHECK(g[0].first == "optimizer.eta");
  CHECK(g[1].second == std::vector<std::string>{"0", "1"});
  CHECK_THROWS_AS(parse_grid(""), Error);
  CHECK_THROWS_AS(parse_grid("optimizer.eta="), Error);
}

TEST_CASE("sweep over a 2x2 grid") {
  cliplab::testing::TempDir dir("sweep");
  const auto cfg = quadratic(dir.str("out"));
  const auto res = sweep(cfg, parse_grid("optimizer.eta=0.1,0.2;optimizer.gamma=1,2"), 2);
  CHECK(res.exit_code == 0);
  CHECK(res.table.rows().size() == 4);
  CHECK(res.cells[1].optimizer.eta == 0.1);
  CHECK(res.cells[1].optimizer.gamma == 2.0);
  CHECK(fs::exists(fs::path(cfg.output.dir) / "cell_3" / "summary.csv"));
  const auto table = read_file(fs::path(cfg.output.dir) / "sweep.csv");
  CHECK(line_count(table) == 5);
  CHECK_THROWS_AS(sweep(cfg, parse_grid("optimizer.nonsense=1"), 1), Error);
}

TEST_CASE("profile in grid and trajectory modes") {
  cliplab::testing::TempDir dir("profile");
  auto cfg = load_config(resolve_preset("quartic-det"));
  cfg.smoothness.per_dim = 101;
  cfg.output.dir = dir.str("grid");
  const auto grid = profile(cfg, false, 1);
  CHECK(grid.samples.size() == 101);
  CHECK(grid.fit.violations == 0);
  CHECK(fs::exists(fs::path(cfg.output.dir) / "landscape.csv"));
  CHECK(fs::exists(fs::path(cfg.output.dir) / "envelope.csv"));

  cfg.output.dir = dir.str("traj");
  cfg.optimizer.schedule = Schedule::explicit_;
  cfg.optimizer.epsilon.reset();
  cfg.optimizer.eta = 0.01;
  cfg.optimizer.gamma = 0.1;
  cfg.run.steps = 500;
  const auto traj = profile(cfg, true, 1, false);
  CHECK(traj.samples.size() == 501);
}

TEST_CASE("verify suites") {
  VerifyOptions opts;
  for (const char* suite : {"lemmas", "equivalences", "envelope"}) {
    for (const auto& r : verify_suite(suite, opts)) {
      CHECK_MESSAGE(r.violations == 0, r.objective << "/" << r.check_name);
    }
  }
  opts.scale_constants = 0.5;
  std::int64_t v = 0;
  for (const auto& r : verify_suite("lemmas", opts)) v += r.violations;
  CHECK(v > 0);
  CHECK_THROWS_AS(verify_suite("bogus", opts), Error);
}

TEST_CASE("report table") {
  CheckResult r{"quartic", "descent", 10, 0, -1.0};
  CHECK(report_table({r}).to_string() == "objective,check_name,samples,violations,max_residual\nquartic,descent,10,0,-1\n");
}

TEST_CASE("dense hessian oracle") {
  CHECK(dense_hessian_norm(make_quartic(), ParamVector{2.0}.span()) == doctest::Approx(48.0));
  CHECK(dense_hessian_norm(make_poly2d(), ParamVector{0.0, -2.0}.span()) == doctest::Approx(2.0));
}
