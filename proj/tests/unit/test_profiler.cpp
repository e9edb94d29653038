#include <doctest.h>

#include <cmath>

#include "cliplab/objectives.hpp"
#include "cliplab/profiler.hpp"
#include "support.hpp"

using namespace cliplab;

namespace {

Objective quadratic_form(std::vector<double> diag) {
  Objective::Parts p;
  p.name = "diag_quadratic";
  p.dim = diag.size();
  p.value = [diag](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += 0.5 * diag[i] * x[i] * x[i];
    return s;
  };
  p.grad = [diag](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = diag[i] * x[i];
  };
  return Objective(std::move(p));
}

std::vector<LandscapeSample> line_samples(double l0, double l1, int n) {
  std::vector<LandscapeSample> out;
  for (int i = 0; i < n; ++i) {
    const double g = std::pow(10.0, -2.0 + 4.0 * i / (n - 1));
    out.push_back({g, l0 + l1 * g, i});
  }
  return out;
}

}  // namespace

TEST_CASE("spectral norm examples") {
  CHECK(hessian_spectral_norm(make_noisy_quadratic(), ParamVector{3.0}.span()) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hessian_spectral_norm(make_quartic(), ParamVector{2.0}.span()) == doctest::Approx(48.0).epsilon(1e-12));
  // Finite-difference products (no analytic hvp).
  CHECK(hessian_spectral_norm(quadratic_form({1.0, -7.0, 3.0}), ParamVector{0.1, 0.2, 0.3}.span()) ==
        doctest::Approx(7.0).epsilon(1e-6));
  CHECK(hessian_spectral_norm(quadratic_form({0.0, 0.0}), ParamVector{1.0, 1.0}.span()) == 0.0);
}

TEST_CASE("spectral norm of an indefinite matrix with nearly tied eigenvalues") {
  CHECK(hessian_spectral_norm(quadratic_form({5.0, -5.0 - 1e-9, 1.0, 4.999}), ParamVector(4).span()) ==
        doctest::Approx(5.0 + 1e-9).epsilon(1e-7));
}

TEST_CASE("spectral norm matches a dense eigensolver on the exp-loss") {
  RngStream data_rng(3, 0);
  const Dataset data = gen_synthetic_dataset(100, 2, 1.0, 1.0, data_rng);
  const Objective e = make_exp_loss(data, 0.5);
  RngStream rng(3, 1);
  for (int s = 0; s < 50; ++s) {
    const std::vector<double> w{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    const double dense = cliplab::testing::spectral_norm(cliplab::testing::exp_loss_hessian(data, 0.5, w));
    CHECK(std::abs(hessian_spectral_norm(e, w) - dense) / dense < 1e-6);
  }
}

TEST_CASE("landscape sampling") {
  const auto samples = sample_landscape(make_quartic(), {ParamVector{1.0}, ParamVector{-2.0}});
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].grad_norm == 4.0);
  CHECK(samples[0].hess_norm == doctest::Approx(12.0));
  CHECK(samples[1].tag == 1);
  CHECK(samples[1].hess_norm == doctest::Approx(48.0));
  CHECK_THROWS_AS(sample_landscape(make_quartic(), {}), Error);
  try {
    sample_landscape(make_quartic(), {ParamVector{1.0}, ParamVector{1.0, 2.0}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("grid points") {
  const std::vector<double> lo{0.0, 10.0}, hi{1.0, 20.0};
  const auto pts = grid_points(lo, hi, 3);
  REQUIRE(pts.size() == 9);
  CHECK(pts[0] == ParamVector{0.0, 10.0});
  CHECK(pts[1] == ParamVector{0.0, 15.0});
  CHECK(pts[3] == ParamVector{0.5, 10.0});
  CHECK(pts[8] == ParamVector{1.0, 20.0});
}

TEST_CASE("envelope fit") {
  SUBCASE("exact line") {
    const auto s = line_samples(2.0, 3.0, 200);
    const auto fit = fit_l0_l1(s, 10);
    CHECK(fit.l0 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.l1 == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(fit.violations == 0);
  }
  SUBCASE("constant curvature") {
    auto s = line_samples(5.0, 0.0, 100);
    const auto fit = fit_l0_l1(s, 8);
    CHECK(fit.l0 == doctest::Approx(5.0));
    CHECK(fit.l1 == 0.0);
    CHECK(fit.violations == 0);
  }
  SUBCASE("noisy data is fully covered") {
    RngStream rng(4, 0);
    std::vector<LandscapeSample> s;
    for (int i = 0; i < 1000; ++i) {
      const double g = std::pow(10.0, rng.uniform(-3.0, 3.0));
      s.push_back({g, (1.0 + 2.0 * g) * rng.uniform(0.2, 1.0), i});
    }
    const auto fit = fit_l0_l1(s, 15);
    CHECK(fit.violations == 0);
    CHECK(count_envelope_violations(s, fit.l0, fit.l1) == 0);
    CHECK(fit.inflation >= 1.0);
  }
  SUBCASE("quartic on [-10, 10]") {
    const std::vector<double> lo{-10.0}, hi{10.0};
    const auto s = sample_landscape(make_quartic(), grid_points(lo, hi, 2001));
    const auto fit = fit_l0_l1(s, 20);
    CHECK(count_envelope_violations(s, fit.l0, fit.l1) == 0);
  }
  SUBCASE("degenerate inputs") {
    const std::vector<LandscapeSample> same(10, {1.0, 2.0, 0});
    CHECK_THROWS_AS(fit_l0_l1(same, 5), Error);
    CHECK_THROWS_AS(fit_l0_l1(line_samples(1.0, 1.0, 10), 0), Error);
  }
}

TEST_CASE("violation count") {
  const std::vector<LandscapeSample> s{{1.0, 3.0, 0}, {2.0, 6.0, 1}, {0.0, 1.0, 2}};
  CHECK(count_envelope_violations(s, 1.0, 2.0) == 1);
  CHECK(count_envelope_violations(s, 1.0, 3.0) == 0);
}

TEST_CASE("rank correlation") {
  CHECK(rank_correlation(line_samples(1.0, 1.0, 50)) == doctest::Approx(1.0));
  std::vector<LandscapeSample> down;
  for (int i = 1; i <= 20; ++i) down.push_back({static_cast<double>(i), 100.0 / i, i});
  CHECK(rank_correlation(down) == doctest::Approx(-1.0));

  const std::vector<double> lo{-3.0, -3.0}, hi{3.0, 3.0};
  const auto s = sample_landscape(make_poly2d(), grid_points(lo, hi, 50));
  CHECK(rank_correlation(s) > 0.8);
}
