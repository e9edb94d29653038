#include "cliplab/clipping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cliplab {

const char* to_string(ClipMode mode) {
  switch (mode) {
    case ClipMode::hard: return "hard";
    case ClipMode::soft: return "soft";
    case ClipMode::normalized: return "normalized";
  }
  return "unknown";
}

ClipMode parse_clip_mode(const std::string& text) {
  if (text == "hard") return ClipMode::hard;
  if (text == "soft") return ClipMode::soft;
  if (text == "normalized") return ClipMode::normalized;
  throw Error(ErrorKind::invalid_input, "unknown clip mode '" + text + "'");
}

void ClipConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorKind::invalid_input, "eta must be finite and > 0");
  }
  if (!(gamma > 0.0)) throw Error(ErrorKind::invalid_input, "gamma must be > 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw Error(ErrorKind::invalid_input, "beta must be in [0, 1)");
  if (!(nu >= 0.0 && nu <= 1.0)) throw Error(ErrorKind::invalid_input, "nu must be in [0, 1]");
  if (mode == ClipMode::normalized && nu != 1.0) {
    throw Error(ErrorKind::invalid_input, "normalized mode requires nu = 1");
  }
}

double clip_factor_hard(double eta, double gamma, double norm) noexcept {
  if (norm == 0.0) return eta;
  return std::min(eta, gamma / norm);
}

double clip_factor_soft(double eta, double gamma, double norm) noexcept {
  double f = eta / (1.0 + eta * norm / gamma);
  // Rounding can leave f * norm an ulp above gamma; step down to the bound.
  while (norm > 0.0 && f * norm > gamma) f = std::nextafter(f, 0.0);
  return f;
}

ParamVector momentum_update(const ParamVector& m, const ParamVector& g, double beta) {
  require_same_dim(m.size(), g.size(), "momentum_update");
  ParamVector out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = beta * m[i] + (1.0 - beta) * g[i];
  return out;
}

double advance(OptimizerState& state, std::span<const double> g, const ClipConfig& cfg,
               std::span<double> scratch) noexcept {
  const std::size_t n = state.x.size();
  double* m = state.m.data();
  double* x = state.x.data();
  for (std::size_t i = 0; i < n; ++i) m[i] = cfg.beta * m[i] + (1.0 - cfg.beta) * g[i];
  const double m_norm = l2_norm_unchecked(state.m.span());

  if (cfg.mode == ClipMode::normalized) {
    if (m_norm > 0.0) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = cfg.eta * (m[i] / m_norm);
    } else {
      std::fill(scratch.begin(), scratch.end(), 0.0);
    }
  } else {
    const double g_norm = l2_norm_unchecked(g);
    const bool hard = cfg.mode == ClipMode::hard;
    const double cm = hard ? clip_factor_hard(cfg.eta, cfg.gamma, m_norm)
                           : clip_factor_soft(cfg.eta, cfg.gamma, m_norm);
    const double cg = hard ? clip_factor_hard(cfg.eta, cfg.gamma, g_norm)
                           : clip_factor_soft(cfg.eta, cfg.gamma, g_norm);
    // Written as an offset from the clipped-gradient step so that nu = 0 and
    // beta = 0 reduce to it exactly.
    if (cfg.nu == 1.0) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = cm * m[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double sg = cg * g[i];
        scratch[i] = sg + cfg.nu * (cm * m[i] - sg);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) x[i] -= scratch[i];
  ++state.t;
  return l2_norm_unchecked(scratch);
}

OptimizerState step(const OptimizerState& state, const ParamVector& g, const ClipConfig& cfg) {
  cfg.validate();
  require_same_dim(state.x.size(), state.m.size(), "step (x vs m)");
  require_same_dim(state.x.size(), g.size(), "step (x vs g)");
  require_finite(g.span(), "step gradient");
  OptimizerState next = state;
  std::vector<double> scratch(g.size());
  advance(next, g.span(), cfg, scratch);
  return next;
}

double lyapunov_value(double f_value, double m_norm, const ClipConfig& cfg) noexcept {
  const double weight = cfg.beta * cfg.nu / (2.0 * (1.0 - cfg.beta));
  if (weight == 0.0 || m_norm == 0.0) return f_value;
  return f_value + weight * std::min(cfg.eta * m_norm * m_norm, cfg.gamma * m_norm);
}

namespace {

bool finite_span(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

// Shared driver; `sample` fills the gradient used for the update at x_t given
// the exact gradient already evaluated there.
template <typename Sampler>
Trajectory run_impl(const Objective& obj, const ClipConfig& cfg, const ParamVector& x0,
                    std::int64_t steps, const RunOptions& options, Sampler&& sample) {
  cfg.validate();
  if (steps < 1) throw Error(ErrorKind::invalid_input, "number of steps must be >= 1");
  if (options.record_stride < 1) throw Error(ErrorKind::invalid_input, "record_stride must be >= 1");
  require_same_dim(x0.size(), obj.dim(), "run initial point");
  require_finite(x0.span(), "run initial point");
  if (options.m0) {
    require_same_dim(options.m0->size(), obj.dim(), "run initial momentum");
    require_finite(options.m0->span(), "run initial momentum");
  }

  const std::size_t n = obj.dim();
  Trajectory traj;
  OptimizerState& state = traj.final_state;
  state.x = x0;
  state.t = 0;

  std::vector<double> grad(n), sample_buf(n), scratch(n), prev_x(n), prev_m(n);
  TrajectorySummary& sum = traj.summary;

  double loss = 0.0;
  try {
    loss = obj.value(state.x.span());
    obj.grad_into(state.x.span(), grad);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("evaluation at the initial point failed: ") + e.what());
  }
  if (!std::isfinite(loss) || !finite_span(grad)) {
    throw Error(ErrorKind::non_finite, "objective is not finite at the initial point");
  }
  double grad_norm = l2_norm_unchecked(grad);

  auto push_record = [&](double lyap, double step_norm) {
    if (state.t % options.record_stride != 0 && state.t != steps) return;
    TrajectoryRecord r{state.t, loss, grad_norm, lyap, step_norm, std::nullopt};
    if (options.record_x) r.x = state.x;
    traj.records.push_back(std::move(r));
  };
  auto abort_run = [&](const std::string& reason) {
    std::copy(prev_x.begin(), prev_x.end(), state.x.begin());
    std::copy(prev_m.begin(), prev_m.end(), state.m.begin());
    --state.t;
    traj.completed = false;
    traj.abort_reason = reason;
  };

  const auto expected_records = static_cast<std::size_t>(steps / options.record_stride + 2);
  traj.records.reserve(std::min<std::size_t>(expected_records, 1u << 20));

  for (std::int64_t t = 0; t < steps; ++t) {
    try {
      sample(state.x.span(), std::span<const double>(grad), std::span<double>(sample_buf));
    } catch (const Error& e) {
      traj.completed = false;
      traj.abort_reason = e.what();
      break;
    }
    if (!finite_span(sample_buf)) {
      traj.completed = false;
      traj.abort_reason = "non-finite gradient sample at step " + std::to_string(t);
      break;
    }
    if (t == 0) {
      state.m = options.m0 ? *options.m0 : ParamVector(std::vector<double>(sample_buf));
      sum.initial_lyapunov = lyapunov_value(loss, l2_norm_unchecked(state.m.span()), cfg);
      push_record(sum.initial_lyapunov, 0.0);
    }

    std::copy(state.x.begin(), state.x.end(), prev_x.begin());
    std::copy(state.m.begin(), state.m.end(), prev_m.begin());
    const double step_norm = advance(state, sample_buf, cfg, scratch);

    try {
      loss = obj.value(state.x.span());
      obj.grad_into(state.x.span(), grad);
    } catch (const Error& e) {
      abort_run(e.what());
      break;
    }
    if (!std::isfinite(loss) || !finite_span(grad) || !state.x.all_finite()) {
      abort_run("non-finite evaluation after step " + std::to_string(t));
      break;
    }
    grad_norm = l2_norm_unchecked(grad);
    const double lyap = lyapunov_value(loss, l2_norm_unchecked(state.m.span()), cfg);

    ++sum.steps;
    sum.grad_norm_sum += grad_norm;
    sum.max_step_norm = std::max(sum.max_step_norm, step_norm);
    sum.final_lyapunov = lyap;
    if (state.t > options.tail_start) {
      sum.tail_loss_mean += loss;
      ++sum.tail_count;
    }
    push_record(lyap, step_norm);
  }

  if (sum.steps == 0) {
    // Aborted before the first step; report the initial point.
    if (state.m.empty()) state.m = ParamVector(n);
    sum.final_lyapunov = sum.initial_lyapunov;
  }
  // Final values describe the last good iterate.
  sum.final_loss = obj.value(state.x.span());
  sum.final_grad_norm = l2_norm(obj.grad(state.x.span()).span());
  sum.tail_loss_mean = sum.tail_count > 0 ? sum.tail_loss_mean / static_cast<double>(sum.tail_count)
                                          : std::numeric_limits<double>::quiet_NaN();
  return traj;
}

}  // namespace

Trajectory run_deterministic(const Objective& obj, const ClipConfig& cfg, const ParamVector& x0,
                             std::int64_t steps, const RunOptions& options) {
  return run_impl(obj, cfg, x0, steps, options,
                  [](std::span<const double>, std::span<const double> grad, std::span<double> out) {
                    std::copy(grad.begin(), grad.end(), out.begin());
                  });
}

Trajectory run_stochastic(const Objective& obj, const ClipConfig& cfg, const ParamVector& x0,
                          std::int64_t steps, RngStream& rng, const RunOptions& options) {
  if (!obj.has_noisy_grad()) {
    throw Error(ErrorKind::capability, obj.name() + " has no stochastic gradient");
  }
  return run_impl(obj, cfg, x0, steps, options,
                  [&](std::span<const double> x, std::span<const double>, std::span<double> out) {
                    obj.noisy_grad_into(x, rng, out);
                  });
}

}  // namespace cliplab
