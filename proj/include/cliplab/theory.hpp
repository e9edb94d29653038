#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cliplab/clipping.hpp"
#include "cliplab/objective.hpp"
#include "cliplab/smoothness.hpp"

namespace cliplab {

// ---------------------------------------------------------------------------
// Lyapunov function and local smoothness lemmas
// ---------------------------------------------------------------------------

/// G(x, m) = F(x) + beta nu / (2 (1 - beta)) min(eta ||m||^2, gamma ||m||).
double lyapunov(const Objective& obj, const ParamVector& x, const ParamVector& m,
                const ClipConfig& cfg);

/// Gradient growth: ||grad F(x+)|| - e^c (c L0 / L1 + ||grad F(x)||).
/// Empty when ||x+ - x|| > c / L1.
std::optional<double> check_gradient_growth(const Objective& obj, const ParamVector& x,
                                            const ParamVector& x_plus,
                                            const SmoothnessConstants& k);

/// Descent inequality residual
///   F(x+) - F(x) - <grad F(x), x+ - x> - (A L0 + B L1 ||grad F(x)||)/2 ||x+ - x||^2.
std::optional<double> check_descent_inequality(const Objective& obj, const ParamVector& x,
                                               const ParamVector& x_plus,
                                               const SmoothnessConstants& k);

/// Local gradient Lipschitz residual
///   ||grad F(x+) - grad F(x)|| - (A L0 + B L1 ||grad F(x)||) ||x+ - x||.
std::optional<double> check_grad_lipschitz_local(const Objective& obj, const ParamVector& x,
                                                 const ParamVector& x_plus,
                                                 const SmoothnessConstants& k);

/// min(||g|| / L1, ||g||^2 / L0) - 8 (F(x) - F*). Needs a known F*.
double check_grad_norm_bound(const Objective& obj, const ParamVector& x,
                             const SmoothnessConstants& k);

/// One row of a verification report.
struct CheckResult {
  std::string objective;
  std::string check_name;
  std::int64_t samples = 0;
  std::int64_t violations = 0;
  double max_residual = -std::numeric_limits<double>::infinity();

  bool passed() const noexcept { return violations == 0; }
};

struct LemmaSuiteOptions {
  std::vector<double> box_low;
  std::vector<double> box_high;
  std::int64_t samples = 10000;
  std::uint64_t seed = 2020;
  double slack = 1e-12;
};

/// Samples x uniformly in the box and x+ = x + r u with r ~ U(0, c/L1] and u
/// uniform on the sphere; evaluates all four lemma residuals (the gradient
/// norm bound only when F* is known). Returns one row per check.
std::vector<CheckResult> run_lemma_suite(const Objective& obj, const SmoothnessConstants& k,
                                         const LemmaSuiteOptions& options);

// ---------------------------------------------------------------------------
// Step-size schedules and iteration budgets
// ---------------------------------------------------------------------------

struct BudgetInputs {
  double delta = 0.0;    // F(x0) - F*
  double epsilon = 0.1;  // target stationarity
  double sigma = 0.0;    // noise bound
};

/// A = B = 1.06 for the deterministic theorem (c = 1/10).
inline constexpr double kDeterministicAB = 1.06;

/// ceil(3 delta max{1/(eps^2 eta), 25 eta / gamma^2}).
std::int64_t theorem31_budget(const BudgetInputs& inputs, double eta, double gamma);

struct Theorem31Check {
  bool gamma_ok = false;    // gamma <= (1 - beta) / (10 B L1)
  bool eta_ok = false;      // eta <= (1 - beta) / (10 A L0)
  bool epsilon_ok = false;  // eps < gamma / (5 eta)
  double epsilon_effective = 0.0;  // min(eps, gamma / (5 eta))

  bool step_sizes_ok() const noexcept { return gamma_ok && eta_ok; }
};

Theorem31Check theorem31_validate(double l0, double l1, double beta, double eta, double gamma,
                                  double epsilon);

struct StepSizes {
  double eta = 0.0;
  double gamma = 0.0;
};

/// Largest admissible step sizes: gamma = (1-beta)/(10 B L1), eta = (1-beta)/(10 A L0).
StepSizes theorem31_step_sizes(double l0, double l1, double beta);

enum class StochasticConstants {
  theorem,   // A = B = 1.01
  appendix,  // A = B = 1.002 (c = 1/500)
};

struct Theorem32Params {
  double eta = 0.0;
  double gamma = 0.0;
  std::int64_t steps = 0;
};

/// gamma = eps/(2 sigma) min{eps/(A L0), (1-beta)/(A L0), (1-beta)/(25 B L1)},
/// eta = gamma / (5 sigma), T = ceil(3 delta / (eps^2 eta)).
/// Requires eps <= 0.1 and sigma >= 1.
Theorem32Params theorem32_params(const BudgetInputs& inputs, double beta, double l0, double l1,
                                 StochasticConstants constants = StochasticConstants::theorem);

struct SnmParams {
  double eta = 0.0;
  double alpha = 0.0;  // 1 - beta
  std::int64_t steps = 0;
};

/// Normalized-momentum schedule with unit order constants:
/// alpha = eps^2 / sigma^2, eta = min(1/L1, eps/L0) alpha, T = ceil(delta / (eta eps)).
/// Requires eps <= min(L0/L1, sigma).
SnmParams snm_params(const BudgetInputs& inputs, double l0, double l1);

// ---------------------------------------------------------------------------
// Limiting loss of the mixed update on f(x, xi) = (x + xi)^2 / 2
// ---------------------------------------------------------------------------

/// lim E[F(x_t)] for F(x) = x^2/2 with unclipped steps; 0 < eta < 1,
/// 0 <= beta < 1, 0 <= nu <= 1.
double qhm_limit_closed_form(double eta, double beta, double nu);

using Matrix4 = std::array<std::array<double, 4>, 4>;
using Vector4 = std::array<double, 4>;

/// Transition of (E x^2, E m^2, E x m, 1) under one unclipped step.
Matrix4 qhm_moment_matrix(double eta, double beta, double nu);

Vector4 mat_vec(const Matrix4& m, const Vector4& v) noexcept;

/// Iterates the moment recursion T times from (x0^2, m0^2, x0 m0, 1) and returns
/// half the first component. Throws `non_convergence` if the last step still
/// moves the state by more than `drift_tol` (relative).
double qhm_limit_matrix_oracle(double eta, double beta, double nu, std::int64_t steps,
                               double x0 = 0.0, double m0 = 0.0, double drift_tol = 1e-13);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::vector<double> per_seed;
};

/// Averages x_t^2 / 2 over t in (burn_in, T] per seed (x0 = m0 = 0, no
/// clipping), then reports the across-seed mean and standard error.
MonteCarloEstimate qhm_limit_monte_carlo(double eta, double beta, double nu, std::int64_t steps,
                                         int n_seeds, std::int64_t burn_in,
                                         std::uint64_t base_seed = 2020);

}  // namespace cliplab
