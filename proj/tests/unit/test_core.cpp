#include <doctest.h>

#include <cmath>
#include <limits>

#include "cliplab/core.hpp"
#include "cliplab/objective.hpp"
#include "cliplab/objectives.hpp"
#include "cliplab/rng.hpp"

using namespace cliplab;

TEST_CASE("l2_norm examples") {
  CHECK(l2_norm(ParamVector{3.0, 4.0}.span()) == 5.0);
  CHECK(l2_norm(ParamVector{0.0, 0.0, 0.0}.span()) == 0.0);
  CHECK(l2_norm(ParamVector{1.0, 1.0, 1.0, 1.0}.span()) == 2.0);
}

TEST_CASE("l2_norm rejects non-finite entries") {
  const ParamVector v{1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(l2_norm(v.span()), Error);
  try {
    l2_norm(ParamVector{std::numeric_limits<double>::infinity()}.span());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_finite);
  }
}

TEST_CASE("l2_norm is homogeneous to 2 ulp") {
  RngStream rng(3, 0);
  for (int s = 0; s < 1000; ++s) {
    ParamVector v(5);
    for (double& a : v) a = rng.normal();
    const double c = std::pow(2.0, rng.uniform(-30.0, 30.0)) * (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                     rng.uniform(0.5, 1.5);
    const double lhs = l2_norm((c * v).span());
    const double rhs = std::abs(c) * l2_norm(v.span());
    CHECK(ulp_distance(lhs, rhs) <= 2);
  }
}

TEST_CASE("huge and tiny coordinates do not overflow the norm") {
  CHECK(l2_norm(ParamVector{3e200, 4e200}.span()) == doctest::Approx(5e200));
  CHECK(l2_norm(ParamVector{3e-200, 4e-200}.span()) == doctest::Approx(5e-200));
}

TEST_CASE("ParamVector arithmetic checks dimensions") {
  ParamVector a{1.0, 2.0};
  const ParamVector b{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(a += b, Error);
  CHECK((a + ParamVector{1.0, 1.0}) == ParamVector{2.0, 3.0});
  CHECK((2.0 * a) == ParamVector{2.0, 4.0});
}

TEST_CASE("ulp distance") {
  CHECK(ulp_distance(1.0, 1.0) == 0);
  CHECK(ulp_distance(1.0, std::nextafter(1.0, 2.0)) == 1);
  CHECK(ulp_distance(0.0, -0.0) == 0);
}

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 1), b(42, 1), c(42, 2), d(43, 1);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
  RngStream p(42, 1);
  CHECK(p.substream(0).stream_id() != p.substream(1).stream_id());
}

TEST_CASE("uniform draws stay in range") {
  RngStream rng(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double w = rng.uniform(-2.0, 5.0);
    CHECK(w >= -2.0);
    CHECK(w < 5.0);
  }
}

TEST_CASE("unit-variance noise moments over 1e6 draws") {
  RngStream rng(2020, 0);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = uniform_unit_variance_noise(rng);
    sum += d;
    sq += d * d;
    worst = std::max(worst, std::abs(d));
  }
  CHECK(worst <= std::sqrt(3.0));
  CHECK(std::abs(sum / n) < 0.005);
  CHECK(sq / n > 0.995);
  CHECK(sq / n < 1.005);
}

TEST_CASE("normal draws have unit variance") {
  RngStream rng(9, 4);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

namespace {

Objective half_square() {
  Objective::Parts p;
  p.name = "half_square";
  p.dim = 1;
  p.value = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
  p.grad = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
  return Objective(std::move(p));
}

Objective constant() {
  Objective::Parts p;
  p.name = "constant";
  p.dim = 3;
  p.value = [](std::span<const double>) { return 7.0; };
  p.grad = [](std::span<const double>, std::span<double> out) {
    for (double& a : out) a = 0.0;
  };
  return Objective(std::move(p));
}

}  // namespace

TEST_CASE("finite-difference gradient") {
  const Objective q = make_quartic();
  const ParamVector x{1.0};
  const auto g = finite_diff_grad(q, x.span(), 1e-5);
  CHECK(std::abs(g[0] - 4.0) / 4.0 < 1e-6);

  const ParamVector y{1.0, -2.0, 3.0};
  CHECK(finite_diff_grad(constant(), y.span(), 1e-5) == ParamVector(3));
  CHECK_THROWS_AS(finite_diff_grad(q, x.span(), 0.0), Error);
}

TEST_CASE("finite-difference gradient reports the coordinate of a bad evaluation") {
  Objective::Parts p;
  p.name = "log";
  p.dim = 2;
  p.value = [](std::span<const double> x) { return std::log(x[0]) + x[1]; };
  p.grad = [](std::span<const double> x, std::span<double> out) {
    out[0] = 1.0 / x[0];
    out[1] = 1.0;
  };
  const Objective obj(std::move(p));
  const ParamVector x{0.0, 1.0};
  try {
    finite_diff_grad(obj, x.span(), 1e-3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::non_finite);
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("finite-difference hessian-vector product") {
  const ParamVector v{1.0};
  for (double x : {-3.0, 0.0, 2.5}) {
    const ParamVector xv{x};
    CHECK(hvp_fd(half_square(), xv.span(), v.span(), 1e-5)[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
  const ParamVector two{2.0};
  CHECK(hvp_fd(make_quartic(), two.span(), v.span(), 1e-5)[0] == doctest::Approx(48.0).epsilon(1e-8));
  CHECK_THROWS_AS(hvp_fd(make_quartic(), two.span(), ParamVector{0.0}.span(), 1e-5), Error);
}

TEST_CASE("default finite-difference step scales with the point") {
  CHECK(default_fd_step(ParamVector{0.0}.span()) == doctest::Approx(1e-5));
  CHECK(default_fd_step(ParamVector{3.0, 4.0}.span()) == doctest::Approx(6e-5));
}
