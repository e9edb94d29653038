#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cliplab/harness/config.hpp"
#include "cliplab/harness/csv.hpp"
#include "cliplab/objective.hpp"
#include "cliplab/profiler.hpp"

namespace cliplab::harness {

struct Problem {
  Objective objective;
  /// Closed-form (L0, L1) when the objective kind has one.
  std::optional<std::pair<double, double>> certified;
};

Problem build_problem(const ExperimentConfig& cfg);

struct ResolvedSmoothness {
  std::string source;
  double l0 = 0.0;
  double l1 = 0.0;
};

/// (L0, L1) for the auto schedules: certified, explicit, or an envelope fit
/// on the configured grid.
ResolvedSmoothness resolve_smoothness(const ExperimentConfig& cfg, const Problem& problem);

/// Everything a single seed needs to run.
struct SeedPlan {
  std::uint64_t seed = 0;
  ParamVector x0;
  ClipConfig clip;
  std::int64_t steps = 0;
  double delta = 0.0;  // F(x0) - F*, with F* = 0 when unknown
};

SeedPlan plan_seed(const ExperimentConfig& cfg, const Problem& problem,
                   const std::optional<ResolvedSmoothness>& smoothness, std::uint64_t seed);

/// Budgets beyond this are rejected rather than run.
inline constexpr std::int64_t kMaxSteps = 1'000'000'000;

/// Every step up to 1e5 steps, then every ceil(T / 1e5)-th.
std::int64_t record_stride(std::int64_t steps);

struct SeedOutcome {
  SeedPlan plan;
  std::optional<Trajectory> trajectory;
  std::string error_kind;  // empty on success
  std::string error;
};

struct ExperimentResult {
  std::optional<ResolvedSmoothness> smoothness;
  std::vector<SeedOutcome> seeds;
  CsvTable summary{summary_header()};
  CsvTable aggregate{aggregate_header()};
  /// 0 on success, 3 if any seed failed or aborted.
  int exit_code = 0;

  static std::vector<std::string> summary_header();
  static std::vector<std::string> aggregate_header();
};

/// Runs every seed (in parallel on `workers` threads) and, unless
/// `write_files` is false, writes trajectory_seed<S>.csv, summary.csv,
/// aggregate.csv and, on failure, errors.csv into cfg.output.dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers,
                                bool write_files = true);

using GridSpec = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// "optimizer.eta=0.1,0.2;optimizer.nu=0,1" -> ordered (key, values) pairs.
GridSpec parse_grid(const std::string& text);

struct SweepResult {
  std::vector<ExperimentConfig> cells;
  CsvTable table{{}};
  int exit_code = 0;
};

/// Cartesian product of the grid (last key fastest). Each cell runs into
/// <output.dir>/cell_<i>; sweep.csv has one row per cell.
SweepResult sweep(const ExperimentConfig& base, const GridSpec& grid, std::size_t workers,
                  bool write_files = true);

struct ProfileResult {
  std::vector<LandscapeSample> samples;
  EnvelopeFit fit;
  double rank_correlation = 0.0;
  CsvTable landscape{{"tag", "grad_norm", "hess_norm"}};
  CsvTable envelope{{"l0", "l1", "violations", "inflation", "rank_correlation", "samples"}};
};

/// Samples the landscape on the smoothness grid or along the first seed's
/// trajectory, fits the envelope, and writes landscape.csv / envelope.csv.
ProfileResult profile(const ExperimentConfig& cfg, bool trajectory, std::size_t workers,
                      bool write_files = true);

}  // namespace cliplab::harness
