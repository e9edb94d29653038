#include "cliplab/harness/verify.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

#include "cliplab/harness/workers.hpp"
#include "cliplab/objectives.hpp"
#include "cliplab/profiler.hpp"

namespace cliplab::harness {

namespace {

constexpr double kSlack = 1e-12;
constexpr std::uint64_t kMaxUlp = 4;

CheckResult empty_row(const std::string& objective, const std::string& name) {
  return {objective, name, 0, 0, -std::numeric_limits<double>::infinity()};
}

void record(CheckResult& row, double residual, double slack = 0.0) {
  ++row.samples;
  row.max_residual = std::max(row.max_residual, residual);
  if (!(residual <= slack)) ++row.violations;
}

// Shared test problems.
Dataset exp_loss_dataset() {
  RngStream rng(7, 0);
  return gen_synthetic_dataset(100, 2, 1.0, 1.0, rng);
}

constexpr double kExpLambda = 0.5;

SmoothnessConstants exp_loss_certificate(double scale) {
  const auto k = exp_loss_constants(1.0, 2, kExpLambda, 100, 0.5, 0.5);
  return SmoothnessConstants::make(k.l0 * scale, k.l1 * scale);
}

CheckResult definition_check(const Objective& obj, double l0, double l1,
                             const std::vector<ParamVector>& points) {
  CheckResult row = empty_row(obj.name(), "smoothness_definition");
  for (const auto& x : points) {
    const double h = hessian_spectral_norm(obj, x.span());
    const double g = l2_norm(obj.grad(x.span()).span());
    const double bound = l0 + l1 * g;
    record(row, h - bound, kSlack * std::max(1.0, bound));
  }
  return row;
}

std::vector<ParamVector> random_points(std::span<const double> low, std::span<const double> high,
                                       std::size_t count, RngStream& rng) {
  std::vector<ParamVector> pts;
  for (std::size_t s = 0; s < count; ++s) {
    ParamVector x(low.size());
    for (std::size_t i = 0; i < low.size(); ++i) x[i] = rng.uniform(low[i], high[i]);
    pts.push_back(std::move(x));
  }
  return pts;
}

using Task = std::function<std::vector<CheckResult>()>;

std::vector<CheckResult> lemma_task(const Objective& obj, const SmoothnessConstants& k,
                                    std::vector<double> low, std::vector<double> high,
                                    std::int64_t samples, std::uint64_t seed) {
  LemmaSuiteOptions opts;
  opts.box_low = low;
  opts.box_high = high;
  opts.samples = samples;
  opts.seed = seed;
  opts.slack = kSlack;
  auto rows = run_lemma_suite(obj, k, opts);
  RngStream rng(seed, 1);
  const auto pts = random_points(low, high, static_cast<std::size_t>(std::min<std::int64_t>(samples, 2000)), rng);
  rows.push_back(definition_check(obj, k.l0, k.l1, pts));
  return rows;
}

void lemma_tasks(std::vector<Task>& tasks, const VerifyOptions& o) {
  const double s = o.scale_constants;
  tasks.push_back([=] {
    return lemma_task(make_quartic(), SmoothnessConstants::make(16.0 * s, 1.0 * s), {-10.0}, {10.0},
                      10000, o.seed);
  });
  tasks.push_back([=] {
    return lemma_task(make_poly2d(), SmoothnessConstants::make(20.0 * s, 30.0 * s), {-1.5, -3.5},
                      {1.5, -0.5}, 10000, o.seed);
  });
  tasks.push_back([=] {
    return lemma_task(make_exp_loss(exp_loss_dataset(), kExpLambda), exp_loss_certificate(s),
                      {-3.0, -3.0}, {3.0, 3.0}, 1000, o.seed);
  });
}

void oracle_tasks(std::vector<Task>& tasks, const VerifyOptions& o) {
  const double etas[] = {0.1, 0.3, 0.5};
  const double betas[] = {0.0, 0.5, 0.9};
  const double nus[] = {0.0, 0.7, 1.0};
  for (double eta : etas) {
    for (double beta : betas) {
      for (double nu : nus) {
        tasks.push_back([=] {
          const std::string obj = "noisy_quadratic";
          CheckResult matrix = empty_row(obj, "closed_form_vs_matrix");
          CheckResult mc = empty_row(obj, "closed_form_vs_monte_carlo");
          const double closed = qhm_limit_closed_form(eta, beta, nu);
          record(matrix, std::abs(closed - qhm_limit_matrix_oracle(eta, beta, nu, 100000)) - 1e-10);
          const auto est = qhm_limit_monte_carlo(eta, beta, nu, 10000, 32, 2000, o.seed);
          record(mc, std::abs(closed - est.mean) - 3.0 * est.std_err);
          return std::vector<CheckResult>{matrix, mc};
        });
      }
    }
  }
  tasks.push_back([] {
    const std::string obj = "noisy_quadratic";
    CheckResult special = empty_row(obj, "nu0_special_case");
    for (double eta : {0.1, 0.3, 0.5, 0.9}) {
      for (double beta : {0.0, 0.5, 0.9}) {
        record(special, std::abs(qhm_limit_closed_form(eta, beta, 0.0) - eta / (4.0 - 2.0 * eta)) - 1e-12);
      }
    }
    CheckResult eig = empty_row(obj, "nu1_fixed_eigenvector");
    for (double eta : {0.1, 0.3, 0.5}) {
      for (double beta : {0.0, 0.5, 0.9}) {
        const double q = (1.0 + beta) / (1.0 - beta);
        const Vector4 u{-eta * q, -2.0, eta, eta - 2.0 * q};
        const Vector4 mu = mat_vec(qhm_moment_matrix(eta, beta, 1.0), u);
        double worst = 0.0;
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(mu[i] - u[i]));
        record(eig, worst - 1e-12);
      }
    }
    CheckResult order = empty_row(obj, "mixed_below_endpoints");
    const double mixed = qhm_limit_closed_form(0.3, 0.9, 0.7);
    record(order, mixed - std::min(qhm_limit_closed_form(0.3, 0.9, 0.0),
                                   qhm_limit_closed_form(0.3, 0.9, 1.0)),
           -std::numeric_limits<double>::min());
    return std::vector<CheckResult>{special, eig, order};
  });
}

double max_ulp(const ParamVector& a, const ParamVector& b) {
  std::uint64_t worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, ulp_distance(a[i], b[i]));
  return static_cast<double>(worst);
}

void equivalence_tasks(std::vector<Task>& tasks, const VerifyOptions& o) {
  tasks.push_back([seed = o.seed] {
    const std::string obj = "random_steps";
    CheckResult beta0 = empty_row(obj, "beta0_nu_independent");
    CheckResult sgd = empty_row(obj, "nu0_matches_clipped_sgd");
    CheckResult mom = empty_row(obj, "nu1_matches_momentum_clipping");
    CheckResult unclipped = empty_row(obj, "unclipped_momentum_sgd");
    CheckResult normalized = empty_row(obj, "normalized_step_norm");
    CheckResult bound = empty_row(obj, "hard_step_bound");
    RngStream rng(seed, 3);
    const std::size_t dim = 5;
    auto rand_vec = [&](double scale) {
      ParamVector v(dim);
      for (double& a : v) a = scale * rng.normal();
      return v;
    };
    auto naive_norm = [](const ParamVector& v) {
      double s = 0.0;
      for (double a : v) s += a * a;
      return std::sqrt(s);
    };
    const ParamVector zero(dim);
    for (int s = 0; s < 1000; ++s) {
      const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
      const ParamVector g = rand_vec(scale), m = rand_vec(scale);
      ClipConfig c;
      c.eta = std::pow(10.0, rng.uniform(-3.0, 0.0));
      c.gamma = std::pow(10.0, rng.uniform(-2.0, 2.0));
      c.beta = rng.uniform(0.0, 0.99);
      c.nu = rng.uniform();
      const OptimizerState start{zero, m, 0};

      ClipConfig b0 = c;
      b0.beta = 0.0;
      ClipConfig b0_nu0 = b0;
      b0_nu0.nu = 0.0;
      record(beta0, max_ulp(step(start, g, b0).x, step(start, g, b0_nu0).x), kMaxUlp);

      // Straight-line references, written independently of the library update.
      ClipConfig n0 = c;
      n0.nu = 0.0;
      const double cg = std::min(c.eta, c.gamma / naive_norm(g));
      ParamVector ref_sgd(dim);
      for (std::size_t i = 0; i < dim; ++i) ref_sgd[i] = -(cg * g[i]);
      record(sgd, max_ulp(step(start, g, n0).x, ref_sgd), kMaxUlp);

      ClipConfig n1 = c;
      n1.nu = 1.0;
      ParamVector m_next(dim);
      for (std::size_t i = 0; i < dim; ++i) m_next[i] = c.beta * m[i] + (1.0 - c.beta) * g[i];
      const double cm = std::min(c.eta, c.gamma / naive_norm(m_next));
      ParamVector ref_mom(dim), ref_plain(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        ref_mom[i] = -(cm * m_next[i]);
        ref_plain[i] = -(c.eta * m_next[i]);
      }
      record(mom, max_ulp(step(start, g, n1).x, ref_mom), kMaxUlp);

      ClipConfig inf = n1;
      inf.gamma = std::numeric_limits<double>::infinity();
      record(unclipped, max_ulp(step(start, g, inf).x, ref_plain), kMaxUlp);

      ClipConfig nm = n1;
      nm.mode = ClipMode::normalized;
      const double len = naive_norm(step(start, g, nm).x);
      record(normalized, static_cast<double>(ulp_distance(len, nm.eta)), kMaxUlp);

      const double hard_len = naive_norm(step(start, g, c).x);
      record(bound, hard_len - c.gamma, 4.0 * std::numeric_limits<double>::epsilon() * c.gamma);
    }
    return std::vector<CheckResult>{beta0, sgd, mom, unclipped, normalized, bound};
  });
}

void envelope_tasks(std::vector<Task>& tasks, const VerifyOptions& o) {
  const double s = o.scale_constants;
  tasks.push_back([=] {
    const Objective q = make_quartic();
    const double lo[] = {-10.0}, hi[] = {10.0};
    const auto pts = grid_points(lo, hi, 2001);
    auto cert = definition_check(q, 16.0 * s, 1.0 * s, pts);
    cert.check_name = "certified_envelope";
    const auto samples = sample_landscape(q, pts);
    const auto fit = fit_l0_l1(samples, 20);
    CheckResult fitted = empty_row(q.name(), "fitted_envelope");
    record(fitted, static_cast<double>(count_envelope_violations(samples, fit.l0, fit.l1)));
    // x^4 is not L-smooth: every constant L up to 1e6 is exceeded on a wide scan.
    CheckResult witness = empty_row(q.name(), "not_globally_l_smooth");
    const double wlo[] = {-300.0}, whi[] = {300.0};
    double h_max = 0.0;
    for (const auto& x : grid_points(wlo, whi, 6001)) h_max = std::max(h_max, 12.0 * x[0] * x[0]);
    for (double L = 1.0; L <= 1e6; L *= 10.0) record(witness, L - h_max, -1e-300);
    return std::vector<CheckResult>{cert, fitted, witness};
  });
  tasks.push_back([=] {
    const Objective p = make_poly2d();
    const double lo[] = {-3.0, -3.0}, hi[] = {3.0, 3.0};
    const auto pts = grid_points(lo, hi, 50);
    auto cert = definition_check(p, 20.0 * s, 30.0 * s, pts);
    cert.check_name = "certified_envelope";
    const auto samples = sample_landscape(p, pts);
    const auto fit = fit_l0_l1(samples, 20);
    CheckResult fitted = empty_row(p.name(), "fitted_envelope");
    record(fitted, static_cast<double>(count_envelope_violations(samples, fit.l0, fit.l1)));
    CheckResult corr = empty_row(p.name(), "grad_hess_rank_correlation");
    record(corr, 0.8 - rank_correlation(samples), -1e-300);
    return std::vector<CheckResult>{cert, fitted, corr};
  });
  tasks.push_back([=] {
    const Objective e = make_exp_loss(exp_loss_dataset(), kExpLambda);
    const auto k = exp_loss_certificate(s);
    RngStream rng(o.seed, 4);
    const double lo[] = {-3.0, -3.0}, hi[] = {3.0, 3.0};
    auto cert = definition_check(e, k.l0, k.l1, random_points(lo, hi, 200, rng));
    cert.check_name = "certified_envelope";
    const auto samples = sample_landscape(e, random_points(lo, hi, 1000, rng));
    const auto fit = fit_l0_l1(samples, 20);
    CheckResult fitted = empty_row(e.name(), "fitted_envelope");
    record(fitted, static_cast<double>(count_envelope_violations(samples, fit.l0, fit.l1)));
    CheckResult dominated = empty_row(e.name(), "fit_dominated_by_certificate");
    record(dominated, std::max(fit.l0 / k.l0, fit.l1 / k.l1) - 1.01);
    return std::vector<CheckResult>{cert, fitted, dominated};
  });
  tasks.push_back([seed = o.seed] {
    std::vector<CheckResult> rows;
    RngStream rng(seed, 5);
    const auto run = [&](const Objective& obj, std::span<const double> lo,
                         std::span<const double> hi) {
      CheckResult row = empty_row(obj.name(), "power_iteration_vs_dense");
      for (const auto& x : random_points(lo, hi, 100, rng)) {
        const double dense = dense_hessian_norm(obj, x.span());
        const double power = hessian_spectral_norm(obj, x.span());
        const double rel = std::abs(power - dense) / std::max(dense, 1e-300);
        record(row, dense == 0.0 ? power : rel - 1e-6);
      }
      rows.push_back(row);
    };
    const double q_lo[] = {-10.0}, q_hi[] = {10.0};
    const double p_lo[] = {-3.0, -3.0}, p_hi[] = {3.0, 3.0};
    run(make_quartic(), q_lo, q_hi);
    run(make_poly2d(), p_lo, p_hi);
    run(make_exp_loss(exp_loss_dataset(), kExpLambda), p_lo, p_hi);
    return rows;
  });
}

}  // namespace

double dense_hessian_norm(const Objective& obj, std::span<const double> x) {
  const std::size_t n = obj.dim();
  Eigen::MatrixXd h(n, n);
  ParamVector e(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const ParamVector col = obj.hvp(x, e.span());
    for (std::size_t i = 0; i < n; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    e[j] = 0.0;
  }
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<CheckResult> verify_suite(const std::string& suite, const VerifyOptions& options) {
  std::vector<Task> tasks;
  const bool all = suite == "all";
  if (all || suite == "lemmas") lemma_tasks(tasks, options);
  if (all || suite == "oracles") oracle_tasks(tasks, options);
  if (all || suite == "equivalences") equivalence_tasks(tasks, options);
  if (all || suite == "envelope") envelope_tasks(tasks, options);
  if (tasks.empty()) {
    throw Error(ErrorKind::invalid_input, "unknown suite '" + suite +
                                              "' (expected lemmas, oracles, equivalences, envelope or all)");
  }
  std::vector<std::vector<CheckResult>> parts(tasks.size());
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) { parts[i] = tasks[i](); });

  // Rows with the same (objective, check) from sharded tasks are merged.
  std::vector<CheckResult> out;
  for (const auto& part : parts) {
    for (const auto& row : part) {
      auto it = std::find_if(out.begin(), out.end(), [&](const CheckResult& r) {
        return r.objective == row.objective && r.check_name == row.check_name;
      });
      if (it == out.end()) {
        out.push_back(row);
      } else {
        it->samples += row.samples;
        it->violations += row.violations;
        it->max_residual = std::max(it->max_residual, row.max_residual);
      }
    }
  }
  return out;
}

CsvTable report_table(const std::vector<CheckResult>& rows) {
  CsvTable t({"objective", "check_name", "samples", "violations", "max_residual"});
  for (const auto& r : rows) {
    t.add_row({r.objective, r.check_name, cell(r.samples), cell(r.violations), cell(r.max_residual)});
  }
  return t;
}

}  // namespace cliplab::harness
