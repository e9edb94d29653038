#include "cliplab/theory.hpp"

#include "cliplab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cliplab {

ABConstants ab_constants(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::invalid_input, "c must be > 0");
  // expm1 keeps both constants accurate as c -> 0.
  const double em1 = std::expm1(c);
  const double b = em1 / c;
  return {2.0 + em1 - b, b};
}

SmoothnessConstants SmoothnessConstants::make(double l0, double l1, double c) {
  if (!(l0 >= 0.0) || !(l1 >= 0.0) || !std::isfinite(l0) || !std::isfinite(l1)) {
    throw Error(ErrorKind::invalid_input, "L0 and L1 must be finite and >= 0");
  }
  const auto ab = ab_constants(c);
  return {l0, l1, c, ab.a, ab.b};
}

double lyapunov(const Objective& obj, const ParamVector& x, const ParamVector& m,
                const ClipConfig& cfg) {
  if (!(cfg.beta < 1.0)) throw Error(ErrorKind::invalid_input, "lyapunov requires beta < 1");
  return lyapunov_value(obj.value(x.span()), l2_norm(m.span()), cfg);
}

namespace {

struct PairEval {
  double dist;
  ParamVector diff;
};

std::optional<PairEval> admissible_pair(const ParamVector& x, const ParamVector& x_plus,
                                        const SmoothnessConstants& k) {
  require_same_dim(x.size(), x_plus.size(), "lemma check");
  if (!(k.l1 > 0.0)) throw Error(ErrorKind::invalid_input, "lemma checks need L1 > 0");
  ParamVector diff = x_plus - x;
  const double dist = l2_norm(diff.span());
  if (dist > k.radius() * (1.0 + 1e-12)) return std::nullopt;
  return PairEval{dist, std::move(diff)};
}

}  // namespace

std::optional<double> check_gradient_growth(const Objective& obj, const ParamVector& x,
                                            const ParamVector& x_plus,
                                            const SmoothnessConstants& k) {
  if (!admissible_pair(x, x_plus, k)) return std::nullopt;
  const double g = l2_norm(obj.grad(x.span()).span());
  const double g_plus = l2_norm(obj.grad(x_plus.span()).span());
  return g_plus - std::exp(k.c) * (k.c * k.l0 / k.l1 + g);
}

std::optional<double> check_descent_inequality(const Objective& obj, const ParamVector& x,
                                               const ParamVector& x_plus,
                                               const SmoothnessConstants& k) {
  auto pair = admissible_pair(x, x_plus, k);
  if (!pair) return std::nullopt;
  const ParamVector g = obj.grad(x.span());
  const double g_norm = l2_norm(g.span());
  const double linear = dot(g.span(), pair->diff.span());
  const double quad = 0.5 * (k.a * k.l0 + k.b * k.l1 * g_norm) * pair->dist * pair->dist;
  return (obj.value(x_plus.span()) - obj.value(x.span())) - linear - quad;
}

std::optional<double> check_grad_lipschitz_local(const Objective& obj, const ParamVector& x,
                                                 const ParamVector& x_plus,
                                                 const SmoothnessConstants& k) {
  auto pair = admissible_pair(x, x_plus, k);
  if (!pair) return std::nullopt;
  const ParamVector g = obj.grad(x.span());
  const ParamVector g_plus = obj.grad(x_plus.span());
  const double change = l2_norm((g_plus - g).span());
  return change - (k.a * k.l0 + k.b * k.l1 * l2_norm(g.span())) * pair->dist;
}

double check_grad_norm_bound(const Objective& obj, const ParamVector& x,
                             const SmoothnessConstants& k) {
  const auto f_star = obj.f_star();
  if (!f_star) throw Error(ErrorKind::capability, obj.name() + " has no known infimum");
  const double g = l2_norm(obj.grad(x.span()).span());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double lhs = 0.0;
  if (g > 0.0) {
    const double by_l1 = k.l1 > 0.0 ? g / k.l1 : kInf;
    const double by_l0 = k.l0 > 0.0 ? g * g / k.l0 : kInf;
    lhs = std::min(by_l1, by_l0);
  }
  return lhs - 8.0 * (obj.value(x.span()) - *f_star);
}

std::vector<CheckResult> run_lemma_suite(const Objective& obj, const SmoothnessConstants& k,
                                         const LemmaSuiteOptions& options) {
  const std::size_t n = obj.dim();
  require_same_dim(options.box_low.size(), n, "lemma suite box");
  require_same_dim(options.box_high.size(), n, "lemma suite box");
  if (options.samples < 1) throw Error(ErrorKind::invalid_input, "lemma suite needs samples");

  std::vector<CheckResult> rows;
  for (const char* name : {"gradient_growth", "descent_inequality", "grad_lipschitz_local"}) {
    rows.push_back({obj.name(), name, 0, 0, -std::numeric_limits<double>::infinity()});
  }
  const bool with_bound = obj.f_star().has_value();
  if (with_bound) {
    rows.push_back({obj.name(), "grad_norm_bound", 0, 0, -std::numeric_limits<double>::infinity()});
  }

  auto record = [&](CheckResult& row, std::optional<double> residual) {
    if (!residual) return;
    ++row.samples;
    row.max_residual = std::max(row.max_residual, *residual);
    if (!(*residual <= options.slack)) ++row.violations;
  };

  RngStream rng(options.seed, 0);
  ParamVector x(n), x_plus(n), dir(n);
  for (std::int64_t s = 0; s < options.samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(options.box_low[i], options.box_high[i]);
    double dn = 0.0;
    do {
      for (std::size_t i = 0; i < n; ++i) dir[i] = rng.normal();
      dn = l2_norm(dir.span());
    } while (dn == 0.0);
    const double r = k.radius() * (1.0 - rng.uniform());
    for (std::size_t i = 0; i < n; ++i) x_plus[i] = x[i] + r * (dir[i] / dn);

    record(rows[0], check_gradient_growth(obj, x, x_plus, k));
    record(rows[1], check_descent_inequality(obj, x, x_plus, k));
    record(rows[2], check_grad_lipschitz_local(obj, x, x_plus, k));
    if (with_bound) record(rows[3], check_grad_norm_bound(obj, x, k));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::int64_t theorem31_budget(const BudgetInputs& inputs, double eta, double gamma) {
  if (!(inputs.delta >= 0.0) || !(inputs.epsilon > 0.0) || !(eta > 0.0) || !(gamma > 0.0)) {
    throw Error(ErrorKind::invalid_input,
                "theorem31_budget needs delta >= 0 and positive epsilon, eta, gamma");
  }
  const double eps = inputs.epsilon;
  const double bound =
      3.0 * inputs.delta * std::max(1.0 / (eps * eps * eta), 25.0 * eta / (gamma * gamma));
  if (!std::isfinite(bound) || bound > 9.0e18) {
    throw Error(ErrorKind::overflow, "theorem31_budget: budget does not fit in 64 bits");
  }
  return static_cast<std::int64_t>(std::ceil(bound));
}

Theorem31Check theorem31_validate(double l0, double l1, double beta, double eta, double gamma,
                                  double epsilon) {
  Theorem31Check check;
  check.gamma_ok = gamma <= (1.0 - beta) / (10.0 * kDeterministicAB * l1);
  check.eta_ok = eta <= (1.0 - beta) / (10.0 * kDeterministicAB * l0);
  check.epsilon_ok = epsilon < gamma / (5.0 * eta);
  check.epsilon_effective = std::min(epsilon, gamma / (5.0 * eta));
  return check;
}

StepSizes theorem31_step_sizes(double l0, double l1, double beta) {
  if (!(l0 > 0.0) || !(l1 > 0.0) || !(beta >= 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::invalid_input, "theorem31_step_sizes needs L0, L1 > 0, beta in [0,1)");
  }
  return {(1.0 - beta) / (10.0 * kDeterministicAB * l0),
          (1.0 - beta) / (10.0 * kDeterministicAB * l1)};
}

Theorem32Params theorem32_params(const BudgetInputs& inputs, double beta, double l0, double l1,
                                 StochasticConstants constants) {
  const double eps = inputs.epsilon;
  const double sigma = inputs.sigma;
  if (!(eps > 0.0 && eps <= 0.1)) {
    throw Error(ErrorKind::precondition, "theorem32_params: requires 0 < epsilon <= 0.1");
  }
  if (!(sigma >= 1.0)) throw Error(ErrorKind::precondition, "theorem32_params: requires sigma >= 1");
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::precondition, "theorem32_params: requires beta in [0, 1)");
  }
  if (!(l0 > 0.0) || !(l1 > 0.0)) {
    throw Error(ErrorKind::precondition, "theorem32_params: requires L0, L1 > 0");
  }
  if (!(inputs.delta >= 0.0)) throw Error(ErrorKind::precondition, "theorem32_params: delta < 0");
  const double ab = constants == StochasticConstants::theorem ? 1.01 : 1.002;
  const double inner =
      std::min({eps / (ab * l0), (1.0 - beta) / (ab * l0), (1.0 - beta) / (25.0 * ab * l1)});
  Theorem32Params p;
  p.gamma = eps / (2.0 * sigma) * inner;
  p.eta = p.gamma / (5.0 * sigma);
  p.steps = static_cast<std::int64_t>(std::ceil(3.0 * inputs.delta / (eps * eps * p.eta)));
  return p;
}

SnmParams snm_params(const BudgetInputs& inputs, double l0, double l1) {
  const double eps = inputs.epsilon;
  if (!(l0 > 0.0) || !(l1 > 0.0) || !(inputs.sigma > 0.0) || !(eps > 0.0)) {
    throw Error(ErrorKind::precondition, "snm_params: requires positive L0, L1, sigma, epsilon");
  }
  if (eps > std::min(l0 / l1, inputs.sigma)) {
    throw Error(ErrorKind::precondition, "snm_params: requires epsilon <= min(L0/L1, sigma)");
  }
  if (!(inputs.delta >= 0.0)) throw Error(ErrorKind::precondition, "snm_params: delta < 0");
  SnmParams p;
  p.alpha = eps * eps / (inputs.sigma * inputs.sigma);
  p.eta = std::min(1.0 / l1, eps / l0) * p.alpha;
  p.steps = static_cast<std::int64_t>(std::ceil(inputs.delta / (p.eta * eps)));
  return p;
}

// ---------------------------------------------------------------------------

namespace {

void check_qhm_range(double eta, double beta, double nu) {
  if (!(eta > 0.0 && eta < 1.0) || !(beta >= 0.0 && beta < 1.0) || !(nu >= 0.0 && nu <= 1.0)) {
    throw Error(ErrorKind::invalid_input,
                "limit formula requires 0 < eta < 1, 0 <= beta < 1, 0 <= nu <= 1");
  }
}

}  // namespace

double qhm_limit_closed_form(double eta, double beta, double nu) {
  check_qhm_range(eta, beta, nu);
  const double base = (1.0 + beta) * (1.0 - beta + beta * eta);
  const double num = base - nu * eta * beta * (1.0 + 3.0 * beta - 2.0 * nu * beta);
  const double den = (2.0 - eta) * base -
                     nu * eta * beta * (4.0 * beta - eta - 3.0 * beta * eta + 2.0 * nu * eta * beta);
  return 0.5 * eta * num / den;
}

Matrix4 qhm_moment_matrix(double eta, double beta, double nu) {
  check_qhm_range(eta, beta, nu);
  // x+ = a x + b m + c xi, m+ = beta m + (1 - beta)(x + xi), E xi = 0, E xi^2 = 1.
  const double a = 1.0 - eta + nu * eta * beta;
  const double b = -nu * eta * beta;
  const double c = -eta * (1.0 - nu * beta);
  const double ob = 1.0 - beta;
  Matrix4 m{};
  m[0] = {a * a, b * b, 2.0 * a * b, c * c};
  m[1] = {ob * ob, beta * beta, 2.0 * beta * ob, ob * ob};
  m[2] = {a * ob, b * beta, a * beta + b * ob, c * ob};
  m[3] = {0.0, 0.0, 0.0, 1.0};
  return m;
}

Vector4 mat_vec(const Matrix4& m, const Vector4& v) noexcept {
  Vector4 out{};
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += m[i][j] * v[j];
    out[i] = s;
  }
  return out;
}

double qhm_limit_matrix_oracle(double eta, double beta, double nu, std::int64_t steps, double x0,
                               double m0, double drift_tol) {
  if (steps < 0) throw Error(ErrorKind::invalid_input, "matrix oracle needs steps >= 0");
  const Matrix4 m = qhm_moment_matrix(eta, beta, nu);
  Vector4 v{x0 * x0, m0 * m0, x0 * m0, 1.0};
  Vector4 prev = v;
  for (std::int64_t t = 0; t < steps; ++t) {
    prev = v;
    v = mat_vec(m, v);
  }
  if (steps > 0) {
    for (std::size_t i = 0; i < 3; ++i) {
      const double scale = std::max(1.0, std::abs(v[i]));
      if (!std::isfinite(v[i]) || std::abs(v[i] - prev[i]) > drift_tol * scale) {
        throw Error(ErrorKind::non_convergence,
                    "moment recursion still drifting after " + std::to_string(steps) +
                        " steps (component " + std::to_string(i) + ")");
      }
    }
  }
  return 0.5 * v[0];
}

MonteCarloEstimate qhm_limit_monte_carlo(double eta, double beta, double nu, std::int64_t steps,
                                         int n_seeds, std::int64_t burn_in,
                                         std::uint64_t base_seed) {
  check_qhm_range(eta, beta, nu);
  if (!(burn_in >= 0 && burn_in < steps) || n_seeds < 2) {
    throw Error(ErrorKind::invalid_input, "Monte-Carlo needs 0 <= burn_in < T and >= 2 seeds");
  }
  const Objective obj = make_noisy_quadratic();
  ClipConfig cfg{eta, std::numeric_limits<double>::infinity(), beta, nu, ClipMode::hard};
  RunOptions options;
  options.m0 = ParamVector{0.0};
  options.record_stride = steps;
  options.tail_start = burn_in;

  MonteCarloEstimate est;
  for (int s = 0; s < n_seeds; ++s) {
    RngStream rng(base_seed, static_cast<std::uint64_t>(s));
    const Trajectory traj = run_stochastic(obj, cfg, ParamVector{0.0}, steps, rng, options);
    if (!traj.completed) throw Error(ErrorKind::non_finite, traj.abort_reason);
    est.per_seed.push_back(traj.summary.tail_loss_mean);
  }
  double sum = 0.0;
  for (double v : est.per_seed) sum += v;
  est.mean = sum / n_seeds;
  double ss = 0.0;
  for (double v : est.per_seed) ss += (v - est.mean) * (v - est.mean);
  est.std_err = std::sqrt(ss / (n_seeds - 1)) / std::sqrt(static_cast<double>(n_seeds));
  return est;
}

}  // namespace cliplab
