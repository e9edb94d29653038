#include "cliplab/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cliplab {

Objective::Objective(Parts parts) : parts_(std::move(parts)) {
  if (parts_.dim == 0) throw Error(ErrorKind::invalid_input, "objective dimension must be positive");
  if (!parts_.value || !parts_.grad) {
    throw Error(ErrorKind::invalid_input, "objective needs value and gradient callbacks");
  }
}

void Objective::check_dim(std::size_t n, const char* context) const {
  require_same_dim(n, parts_.dim, context);
}

double Objective::value(std::span<const double> x) const {
  check_dim(x.size(), "Objective::value");
  return parts_.value(x);
}

ParamVector Objective::grad(std::span<const double> x) const {
  ParamVector out(parts_.dim);
  grad_into(x, out.span());
  return out;
}

void Objective::grad_into(std::span<const double> x, std::span<double> out) const {
  check_dim(x.size(), "Objective::grad");
  check_dim(out.size(), "Objective::grad");
  parts_.grad(x, out);
}

ParamVector Objective::hvp(std::span<const double> x, std::span<const double> v) const {
  if (!parts_.hvp) {
    throw Error(ErrorKind::capability, parts_.name + " has no analytic Hessian-vector product");
  }
  check_dim(x.size(), "Objective::hvp");
  check_dim(v.size(), "Objective::hvp");
  ParamVector out(parts_.dim);
  parts_.hvp(x, v, out.span());
  return out;
}

ParamVector Objective::noisy_grad(std::span<const double> x, RngStream& rng) const {
  ParamVector out(parts_.dim);
  noisy_grad_into(x, rng, out.span());
  return out;
}

void Objective::noisy_grad_into(std::span<const double> x, RngStream& rng,
                                std::span<double> out) const {
  if (!parts_.noisy_grad) {
    throw Error(ErrorKind::capability, parts_.name + " has no stochastic gradient");
  }
  check_dim(x.size(), "Objective::noisy_grad");
  check_dim(out.size(), "Objective::noisy_grad");
  parts_.noisy_grad(x, rng, out);
}

double default_fd_step(std::span<const double> x) { return 1e-5 * (1.0 + l2_norm(x)); }

ParamVector finite_diff_grad(const Objective& obj, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_input, "finite_diff_grad: step must be positive");
  require_finite(x, "finite_diff_grad");
  std::vector<double> probe(x.begin(), x.end());
  ParamVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = obj.value(probe);
    probe[i] = x[i] - h;
    const double down = obj.value(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::non_finite,
                  "finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
    }
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

ParamVector hvp_fd(const Objective& obj, std::span<const double> x, std::span<const double> v,
                   double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::invalid_input, "hvp_fd: step must be positive");
  require_same_dim(x.size(), v.size(), "hvp_fd");
  if (l2_norm(v) == 0.0) throw Error(ErrorKind::invalid_input, "hvp_fd: zero direction");
  std::vector<double> plus(x.size()), minus(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] = x[i] + h * v[i];
    minus[i] = x[i] - h * v[i];
  }
  const ParamVector gp = obj.grad(plus);
  const ParamVector gm = obj.grad(minus);
  ParamVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
  require_finite(out.span(), "hvp_fd");
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  require_same_dim(a.size(), b.size(), "relative_error");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(diff) / std::max(l2_norm(b), floor);
}

}  // namespace cliplab
