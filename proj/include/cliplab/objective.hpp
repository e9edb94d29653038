#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "cliplab/core.hpp"
#include "cliplab/rng.hpp"

namespace cliplab {

/// Evaluatable function bundle F: R^d -> R. Gradient and Hessian-vector
/// callbacks write into caller-provided buffers so optimizer loops run
/// without allocating.
class Objective {
 public:
  using ValueFn = std::function<double(std::span<const double> x)>;
  using GradFn = std::function<void(std::span<const double> x, std::span<double> out)>;
  using HvpFn = std::function<void(std::span<const double> x, std::span<const double> v,
                                   std::span<double> out)>;
  using NoisyGradFn =
      std::function<void(std::span<const double> x, RngStream& rng, std::span<double> out)>;

  struct Parts {
    std::string name;
    std::size_t dim = 0;
    ValueFn value;
    GradFn grad;
    HvpFn hvp;              // optional
    NoisyGradFn noisy_grad; // optional
    std::optional<double> f_star;
    std::optional<double> noise_bound_sigma;
  };

  explicit Objective(Parts parts);

  const std::string& name() const noexcept { return parts_.name; }
  std::size_t dim() const noexcept { return parts_.dim; }

  double value(std::span<const double> x) const;
  ParamVector grad(std::span<const double> x) const;
  void grad_into(std::span<const double> x, std::span<double> out) const;

  bool has_hvp() const noexcept { return static_cast<bool>(parts_.hvp); }
  /// Analytic Hessian-vector product; throws `capability` if absent.
  ParamVector hvp(std::span<const double> x, std::span<const double> v) const;

  bool has_noisy_grad() const noexcept { return static_cast<bool>(parts_.noisy_grad); }
  ParamVector noisy_grad(std::span<const double> x, RngStream& rng) const;
  void noisy_grad_into(std::span<const double> x, RngStream& rng, std::span<double> out) const;

  std::optional<double> f_star() const noexcept { return parts_.f_star; }
  std::optional<double> noise_bound_sigma() const noexcept { return parts_.noise_bound_sigma; }

 private:
  void check_dim(std::size_t n, const char* context) const;

  Parts parts_;
};

/// Default finite-difference step: 1e-5 * (1 + ||x||).
double default_fd_step(std::span<const double> x);

/// Central-difference gradient, (F(x + h e_i) - F(x - h e_i)) / 2h.
ParamVector finite_diff_grad(const Objective& obj, std::span<const double> x, double h);

/// (grad F(x + h v) - grad F(x - h v)) / 2h using the analytic gradient.
ParamVector hvp_fd(const Objective& obj, std::span<const double> x, std::span<const double> v,
                   double h);

/// Relative distance ||a - b|| / max(||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-300);

}  // namespace cliplab
