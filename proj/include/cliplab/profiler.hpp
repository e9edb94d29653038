#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cliplab/objective.hpp"

namespace cliplab {

struct LandscapeSample {
  double grad_norm = 0.0;
  double hess_norm = 0.0;
  std::int64_t tag = 0;
};

struct PowerIterationOptions {
  double tol = 1e-12;
  int max_iters = 1000;
  std::uint64_t seed = 7;
};

/// Spectral norm ||Hess F(x)|| = max |eigenvalue|. Power iteration on the
/// Hessian-vector product, accelerated by restarted Lanczos cycles (Ritz
/// values on a short Krylov block), so indefinite Hessians and clustered
/// eigenvalues converge. Starts from a seeded random direction and restarts
/// once from an orthogonal one if the estimate stalls near zero. Uses the
/// analytic product when present and finite differences otherwise. Throws
/// `non_convergence` (message carries the last estimate and iteration count).
double hessian_spectral_norm(const Objective& obj, std::span<const double> x,
                             const PowerIterationOptions& options = {});

/// One sample per point, tagged with the point index.
std::vector<LandscapeSample> sample_landscape(const Objective& obj,
                                              const std::vector<ParamVector>& points,
                                              const PowerIterationOptions& options = {});

/// Regular grid with `per_dim` points per axis over [low, high] (row-major,
/// last coordinate fastest).
std::vector<ParamVector> grid_points(std::span<const double> low, std::span<const double> high,
                                     std::size_t per_dim);

struct EnvelopeFit {
  double l0 = 0.0;
  double l1 = 0.0;
  std::int64_t violations = 0;
  /// Uniform multiplier applied to the least-squares pair.
  double inflation = 1.0;
};

/// Fits hess <= L0 + L1 grad. Samples are binned by grad norm on a log scale,
/// the per-bin maxima are fitted by nonnegative least squares, and the pair is
/// scaled by the smallest factor >= 1 that leaves no sample above the line.
EnvelopeFit fit_l0_l1(std::span<const LandscapeSample> samples, std::size_t n_bins);

/// Count of samples with hess > L0 + L1 grad.
std::int64_t count_envelope_violations(std::span<const LandscapeSample> samples, double l0,
                                       double l1);

/// Spearman rank correlation between log grad norm and log hess norm over
/// samples where both are positive.
double rank_correlation(std::span<const LandscapeSample> samples);

}  // namespace cliplab
