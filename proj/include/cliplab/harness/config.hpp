#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cliplab/clipping.hpp"
#include "cliplab/theory.hpp"

namespace cliplab::harness {

struct DatasetSpec {
  std::string source = "synthetic";  // synthetic | idx
  std::int64_t n = 200;
  std::int64_t d = 2;
  double radius = 1.0;
  double margin = 1.0;
  std::uint64_t seed = 1;
  std::string images;
  std::string labels;
  int digit_a = 0;
  int digit_b = 1;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ObjectiveSpec {
  std::string kind = "quartic";  // quartic | poly2d | noisy_quadratic | exp_loss
  double lambda = 0.02;
  std::int64_t batch_size = 0;
  DatasetSpec dataset;

  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

enum class Schedule { explicit_, auto_theorem31, auto_theorem32, auto_snm };

const char* to_string(Schedule s);

struct OptimizerSpec {
  Schedule schedule = Schedule::explicit_;
  // Explicit step sizes; must be unset under an auto schedule.
  std::optional<double> eta;
  std::optional<double> gamma;
  double beta = 0.0;
  double nu = 0.0;
  ClipMode mode = ClipMode::hard;
  std::optional<double> epsilon;
  std::optional<double> sigma;
  StochasticConstants constants = StochasticConstants::theorem;

  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

struct SmoothnessSpec {
  std::string source = "certified";  // certified | fit | explicit
  std::optional<double> l0;
  std::optional<double> l1;
  // Fit region (grid with `per_dim` points per axis) and envelope bins.
  std::vector<double> low;
  std::vector<double> high;
  std::int64_t per_dim = 201;
  std::int64_t bins = 20;
  // Exp-loss certificate parameters.
  double rho1 = 0.5;
  double rho2 = 0.5;

  friend bool operator==(const SmoothnessSpec&, const SmoothnessSpec&) = default;
};

struct InitSpec {
  std::string kind = "explicit";  // explicit | random | zero (origin of the objective's dimension)
  std::vector<double> x0;
  std::vector<double> low;
  std::vector<double> high;
  std::optional<std::vector<double>> m0;

  friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

struct RunSpec {
  std::optional<std::int64_t> steps;  // empty means "auto"
  bool stochastic = false;
  std::int64_t burn_in = 0;

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct OutputSpec {
  std::string dir = "clip-lab-out";
  std::string record = "norms";  // none | norms | full

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ObjectiveSpec objective;
  OptimizerSpec optimizer;
  SmoothnessSpec smoothness;
  InitSpec init;
  RunSpec run;
  std::vector<std::uint64_t> seeds{2020};
  OutputSpec output;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the YAML form. Errors are `format` errors prefixed with the
/// offending field path (e.g. "optimizer.eta: expected a number").
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical YAML with every field spelled out.
std::string serialize_config(const ExperimentConfig& cfg);

/// Returns a copy with `path` (dotted, e.g. "optimizer.nu") set to the YAML
/// scalar `value`; the result is re-validated.
ExperimentConfig with_override(const ExperimentConfig& cfg, const std::string& path,
                               const std::string& value);

/// Resolves a built-in preset name to its file, or returns `name_or_path`.
std::string resolve_preset(const std::string& name_or_path);

}  // namespace cliplab::harness
