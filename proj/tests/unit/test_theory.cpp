#include <doctest.h>

#include <cmath>

#include "cliplab/objectives.hpp"
#include "cliplab/theory.hpp"

using namespace cliplab;

TEST_CASE("A and B constants") {
  const auto ab = ab_constants(0.1);
  CHECK(ab.a == doctest::Approx(1.0 + std::exp(0.1) - 10.0 * (std::exp(0.1) - 1.0)).epsilon(1e-14));
  CHECK(ab.b == doctest::Approx(10.0 * (std::exp(0.1) - 1.0)).epsilon(1e-14));
  CHECK(ab.a < 1.06);
  CHECK(ab.b < 1.06);
  CHECK(ab.a == doctest::Approx(1.0535).epsilon(1e-4));
  CHECK(ab.b == doctest::Approx(1.0517).epsilon(1e-4));
  CHECK(ab_constants(1.0).b == doctest::Approx(std::exp(1.0) - 1.0));
  const auto tiny = ab_constants(1e-8);
  CHECK(tiny.a == doctest::Approx(1.0));
  CHECK(tiny.b == doctest::Approx(1.0));
  CHECK_THROWS_AS(ab_constants(0.0), Error);
}

TEST_CASE("A and B are nondecreasing in c") {
  double prev_a = 1.0, prev_b = 1.0;
  for (int i = 1; i <= 1000; ++i) {
    const auto ab = ab_constants(i / 1000.0);
    CHECK(ab.a >= prev_a);
    CHECK(ab.b >= prev_b);
    CHECK(ab.a >= 1.0);
    prev_a = ab.a;
    prev_b = ab.b;
  }
}

TEST_CASE("lyapunov reduces to F") {
  const Objective q = make_quartic();
  const ParamVector x{1.5}, m{2.0};
  ClipConfig c;
  c.beta = 0.0;
  c.nu = 0.7;
  CHECK(lyapunov(q, x, m, c) == q.value(x.span()));
  c.beta = 0.9;
  c.nu = 0.0;
  CHECK(lyapunov(q, x, m, c) == q.value(x.span()));
  c.nu = 1.0;
  CHECK(lyapunov(q, x, ParamVector{0.0}, c) == q.value(x.span()));
  CHECK(lyapunov(q, x, m, c) > q.value(x.span()));
}

TEST_CASE("lemma residuals at x+ = x") {
  const auto k = SmoothnessConstants::make(16.0, 1.0);
  const Objective q = make_quartic();
  const ParamVector x{0.8};
  const double g = std::abs(q.grad(x.span())[0]);
  const auto growth = check_gradient_growth(q, x, x, k);
  REQUIRE(growth);
  CHECK(*growth == doctest::Approx(g * (1.0 - std::exp(0.1)) - std::exp(0.1) * 0.1 * 16.0));
  CHECK(*growth < 0.0);
  CHECK(*check_descent_inequality(q, x, x, k) == 0.0);
  CHECK(*check_grad_lipschitz_local(q, x, x, k) == 0.0);
  CHECK(check_grad_norm_bound(q, ParamVector{0.0}, k) == 0.0);
  // Beyond c / L1 the check is skipped.
  CHECK_FALSE(check_descent_inequality(q, x, ParamVector{0.8 + 0.2}, k));
}

TEST_CASE("grad norm bound needs a known minimum") {
  Objective::Parts p;
  p.name = "line";
  p.dim = 1;
  p.value = [](std::span<const double> x) { return x[0]; };
  p.grad = [](std::span<const double>, std::span<double> out) { out[0] = 1.0; };
  const Objective line(std::move(p));
  try {
    check_grad_norm_bound(line, ParamVector{1.0}, SmoothnessConstants::make(1.0, 1.0));
    FAIL("expected capability error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::capability);
  }
}

TEST_CASE("lemma suite on the quartic") {
  LemmaSuiteOptions opts;
  opts.box_low = {-10.0};
  opts.box_high = {10.0};
  opts.samples = 2000;
  const auto rows = run_lemma_suite(make_quartic(), SmoothnessConstants::make(16.0, 1.0), opts);
  CHECK(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.samples == 2000);
    CHECK(r.violations == 0);
  }
  // Halving the constants must be caught.
  const auto bad = run_lemma_suite(make_quartic(), SmoothnessConstants::make(8.0, 0.5), opts);
  std::int64_t v = 0;
  for (const auto& r : bad) v += r.violations;
  CHECK(v > 0);
}

TEST_CASE("deterministic step budget") {
  CHECK(theorem31_budget({1.0, 0.1, 0.0}, 0.01, 0.1) == 30000);
  CHECK(theorem31_budget({2.0, 0.1, 0.0}, 0.01, 0.1) == 60000);
  CHECK(theorem31_budget({1.0, 0.05, 0.0}, 0.01, 0.1) == 120000);
  // The 25 eta / gamma^2 branch.
  CHECK(theorem31_budget({1.0, 1.0, 0.0}, 1.0, 0.1) == 7500);
  CHECK(theorem31_budget({0.0, 0.1, 0.0}, 0.01, 0.1) == 0);
  CHECK_THROWS_AS(theorem31_budget({-1.0, 0.1, 0.0}, 0.01, 0.1), Error);
  CHECK_THROWS_AS(theorem31_budget({1.0, 0.0, 0.0}, 0.01, 0.1), Error);
  CHECK_THROWS_AS(theorem31_budget({1.0, 0.1, 0.0}, -0.01, 0.1), Error);
}

TEST_CASE("deterministic step sizes and validity check") {
  const auto s = theorem31_step_sizes(16.0, 1.0, 0.9);
  CHECK(s.gamma == doctest::Approx(0.1 / (10.0 * 1.06)));
  CHECK(s.eta == doctest::Approx(0.1 / (10.0 * 1.06 * 16.0)));
  const auto ok = theorem31_validate(16.0, 1.0, 0.9, s.eta, s.gamma, 0.05);
  CHECK(ok.step_sizes_ok());
  CHECK(ok.epsilon_ok);
  const auto too_big = theorem31_validate(16.0, 1.0, 0.9, 2.0 * s.eta, s.gamma, 0.05);
  CHECK_FALSE(too_big.eta_ok);
  const auto eps_big = theorem31_validate(16.0, 1.0, 0.9, s.eta, s.gamma, 10.0);
  CHECK_FALSE(eps_big.epsilon_ok);
  CHECK(eps_big.epsilon_effective == doctest::Approx(s.gamma / (5.0 * s.eta)));
}

TEST_CASE("stochastic schedule parameters") {
  const auto p = theorem32_params({1.0, 0.05, 1.0}, 0.0, 1.0, 1.0);
  CHECK(p.gamma == doctest::Approx(0.025 / 25.25).epsilon(1e-14));
  CHECK(p.gamma == doctest::Approx(9.901e-4).epsilon(1e-4));
  CHECK(p.eta == doctest::Approx(p.gamma / 5.0).epsilon(1e-14));
  CHECK(p.steps == static_cast<std::int64_t>(std::ceil(3.0 / (0.05 * 0.05 * p.eta))));
  const auto q = theorem32_params({1.0, 0.05, 2.0}, 0.3, 2.0, 1.0);
  CHECK(q.gamma / q.eta == doctest::Approx(10.0));
  // Small eps makes the eps / (A L0) term the minimum: gamma scales as eps^2.
  const auto e1 = theorem32_params({1.0, 1e-3, 1.0}, 0.0, 1.0, 1.0);
  const auto e2 = theorem32_params({1.0, 2e-3, 1.0}, 0.0, 1.0, 1.0);
  CHECK(e2.gamma / e1.gamma == doctest::Approx(4.0));
  const auto appendix = theorem32_params({1.0, 0.05, 1.0}, 0.0, 1.0, 1.0, StochasticConstants::appendix);
  CHECK(appendix.gamma == doctest::Approx(0.025 / (25.0 * 1.002)));
  CHECK_THROWS_AS(theorem32_params({1.0, 0.2, 1.0}, 0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(theorem32_params({1.0, 0.05, 0.5}, 0.0, 1.0, 1.0), Error);
}

TEST_CASE("normalized-momentum schedule") {
  const auto p = snm_params({1.0, 0.1, 1.0}, 1.0, 1.0);
  CHECK(p.alpha == doctest::Approx(0.01));
  CHECK(p.eta == doctest::Approx(1e-3));
  CHECK(p.steps == 10000);
  const auto half = snm_params({1.0, 0.05, 1.0}, 1.0, 1.0);
  CHECK(half.alpha / p.alpha == doctest::Approx(0.25));
  // With the eps / L0 branch active, T grows as eps^-4.
  CHECK(static_cast<double>(half.steps) / static_cast<double>(p.steps) == doctest::Approx(16.0));
  CHECK_THROWS_AS(snm_params({1.0, 2.0, 1.0}, 1.0, 1.0), Error);
}

TEST_CASE("limiting loss closed form") {
  CHECK(qhm_limit_closed_form(0.5, 0.0, 0.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(qhm_limit_closed_form(0.5, 0.5, 1.0) == doctest::Approx(0.5 / (11.0 / 3.0)).epsilon(1e-15));
  for (double nu : {0.0, 0.3, 1.0}) {
    CHECK(qhm_limit_closed_form(0.3, 0.0, nu) == doctest::Approx(0.3 / (4.0 - 0.6)).epsilon(1e-15));
  }
  CHECK(qhm_limit_closed_form(0.3, 0.9, 0.7) == doctest::Approx(0.0555487).epsilon(1e-6));
  CHECK(qhm_limit_closed_form(0.3, 0.9, 0.7) < qhm_limit_closed_form(0.3, 0.9, 0.0));
  CHECK(qhm_limit_closed_form(0.3, 0.9, 0.7) < qhm_limit_closed_form(0.3, 0.9, 1.0));
  CHECK_THROWS_AS(qhm_limit_closed_form(1.0, 0.5, 0.5), Error);
  CHECK_THROWS_AS(qhm_limit_closed_form(0.5, 1.0, 0.5), Error);
  CHECK_THROWS_AS(qhm_limit_closed_form(0.5, 0.5, 1.5), Error);
}

TEST_CASE("matrix oracle") {
  CHECK(qhm_limit_matrix_oracle(0.5, 0.5, 0.5, 0) == 0.0);
  for (double eta : {0.1, 0.5}) {
    for (double beta : {0.0, 0.5, 0.9}) {
      for (double nu : {0.0, 0.7, 1.0}) {
        CHECK(std::abs(qhm_limit_matrix_oracle(eta, beta, nu, 100000) -
                       qhm_limit_closed_form(eta, beta, nu)) < 1e-10);
      }
    }
  }
  CHECK_THROWS_AS(qhm_limit_matrix_oracle(0.5, 0.9, 0.7, 3), Error);
}

TEST_CASE("fixed eigenvector of the nu = 1 moment matrix") {
  for (double eta : {0.2, 0.5}) {
    for (double beta : {0.3, 0.8}) {
      const double r = (1.0 + beta) / (1.0 - beta);
      const Vector4 u{-eta * r, -2.0, eta, eta - 2.0 * r};
      const Vector4 mu = mat_vec(qhm_moment_matrix(eta, beta, 1.0), u);
      for (int i = 0; i < 4; ++i) CHECK(std::abs(mu[i] - u[i]) < 1e-12);
    }
  }
}

TEST_CASE("monte-carlo estimate") {
  const auto mc = qhm_limit_monte_carlo(0.5, 0.0, 0.0, 5000, 16, 1000);
  CHECK(mc.per_seed.size() == 16);
  CHECK(mc.std_err > 0.0);
  CHECK(std::abs(mc.mean - 1.0 / 6.0) < 3.0 * mc.std_err);
  const auto again = qhm_limit_monte_carlo(0.5, 0.0, 0.0, 5000, 16, 1000);
  CHECK(again.per_seed == mc.per_seed);
  CHECK_THROWS_AS(qhm_limit_monte_carlo(0.5, 0.0, 0.0, 100, 4, 100), Error);
}
