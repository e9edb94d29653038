#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cliplab/core.hpp"
#include "cliplab/objective.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

enum class ClipMode { hard, soft, normalized };

const char* to_string(ClipMode mode);
ClipMode parse_clip_mode(const std::string& text);

/// Hyperparameters of the clipping framework:
///   m+ = beta m + (1 - beta) g
///   x+ = x - [nu c(m+) m+ + (1 - nu) c(g) g]
/// with c = min(eta, gamma/||.||) (hard) or eta / (1 + eta ||.|| / gamma) (soft).
/// Normalized mode takes x+ = x - eta m+/||m+|| and requires nu = 1; gamma is
/// unused there. gamma may be +inf to disable clipping.
struct ClipConfig {
  double eta = 0.1;
  double gamma = 1.0;
  double beta = 0.0;
  double nu = 0.0;
  ClipMode mode = ClipMode::hard;

  /// Throws `invalid_input` naming the offending field.
  void validate() const;

  friend bool operator==(const ClipConfig&, const ClipConfig&) = default;
};

/// min(eta, gamma / norm); eta when norm == 0.
double clip_factor_hard(double eta, double gamma, double norm) noexcept;

/// eta / (1 + eta * norm / gamma).
double clip_factor_soft(double eta, double gamma, double norm) noexcept;

/// beta m + (1 - beta) g.
ParamVector momentum_update(const ParamVector& m, const ParamVector& g, double beta);

struct OptimizerState {
  ParamVector x;
  ParamVector m;
  std::int64_t t = 0;
};

/// One update with gradient sample `g` taken at `state.x`.
OptimizerState step(const OptimizerState& state, const ParamVector& g, const ClipConfig& cfg);

/// In-place form of `step`. Returns ||x+ - x|| as computed from the update
/// vector (before it is subtracted from x). Inputs must be finite and of
/// matching dimension; `scratch` must have the same dimension as x.
double advance(OptimizerState& state, std::span<const double> g, const ClipConfig& cfg,
               std::span<double> scratch) noexcept;

/// G(x, m) = F(x) + beta nu / (2 (1 - beta)) min(eta ||m||^2, gamma ||m||).
double lyapunov_value(double f_value, double m_norm, const ClipConfig& cfg) noexcept;

struct TrajectoryRecord {
  std::int64_t t = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double lyapunov = 0.0;
  /// ||x_t - x_{t-1}||; zero for the initial record.
  double step_norm = 0.0;
  /// Present only when RunOptions::record_x is set.
  std::optional<ParamVector> x;
};

/// Aggregates over every step, independent of the record stride.
struct TrajectorySummary {
  std::int64_t steps = 0;
  /// sum_{t=1..T} ||grad F(x_t)||.
  double grad_norm_sum = 0.0;
  double initial_lyapunov = 0.0;
  double final_lyapunov = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  double max_step_norm = 0.0;
  /// Mean of F(x_t) over t in (tail_start, T]; NaN when that range is empty.
  double tail_loss_mean = 0.0;
  std::int64_t tail_count = 0;

  double avg_grad_norm() const noexcept {
    return steps > 0 ? grad_norm_sum / static_cast<double>(steps) : 0.0;
  }
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  TrajectorySummary summary;
  OptimizerState final_state;
  /// False when a non-finite evaluation stopped the run; `final_state` then
  /// holds the last good iterate.
  bool completed = true;
  std::string abort_reason;
};

struct RunOptions {
  /// Initial momentum; defaults to the first gradient (sample).
  std::optional<ParamVector> m0;
  /// Keep every stride-th record (plus the last). 1 keeps all T + 1.
  std::int64_t record_stride = 1;
  bool record_x = false;
  /// Tail average covers t in (tail_start, T].
  std::int64_t tail_start = 0;
};

/// Runs the framework with exact gradients for T steps.
Trajectory run_deterministic(const Objective& obj, const ClipConfig& cfg, const ParamVector& x0,
                             std::int64_t steps, const RunOptions& options = {});

/// Runs the framework with g_t = noisy_grad(x_t, rng). Recorded grad norms are
/// of the exact gradient.
Trajectory run_stochastic(const Objective& obj, const ClipConfig& cfg, const ParamVector& x0,
                          std::int64_t steps, RngStream& rng, const RunOptions& options = {});

}  // namespace cliplab
