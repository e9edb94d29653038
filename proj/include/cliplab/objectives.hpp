#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cliplab/objective.hpp"
#include "cliplab/rng.hpp"
#include "cliplab/smoothness.hpp"

namespace cliplab {

/// Binary classification data: n rows of d features with labels in {-1, +1}
/// and every row norm at most `radius`.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> points;  // row-major n x d
  std::vector<int> labels;
  double radius = 0.0;

  std::span<const double> row(std::size_t i) const { return {points.data() + i * d, d}; }

  /// Throws if the label or norm invariants are violated.
  void validate() const;
};

/// F(x) = x^4 on R. f_star = 0.
Objective make_quartic();

/// F(x, y) = x^2 + (y - 3x + 2)^4. f_star = 0 at (0, -2).
Objective make_poly2d();

/// f(x, xi) = (x + xi)^2 / 2 with xi ~ U[-sqrt3, sqrt3], so F(x) = x^2 / 2,
/// noisy gradient x + xi and noise bound sigma = sqrt3.
Objective make_noisy_quadratic();

struct ExpLossOptions {
  /// Mini-batch size for the stochastic gradient; 0 disables it.
  std::size_t batch_size = 0;
};

/// E(w) = (1/n) sum_i exp(-y_i <w, x_i>) + sum_k (cosh(lambda w_k) - 1), the
/// bias fixed at zero. Any exponent above 700 aborts the evaluation with an
/// `overflow` error naming the sample or coordinate.
Objective make_exp_loss(Dataset data, double lambda, ExpLossOptions options = {});

/// Largest exponent the exp-loss accepts before reporting overflow.
inline constexpr double kExpLossMaxExponent = 700.0;

/// Two Gaussian blobs at +-(margin/2) * (1,...,1)/sqrt(d), alternating labels,
/// globally rescaled so the largest row norm equals R.
Dataset gen_synthetic_dataset(std::size_t n, std::size_t d, double radius, double margin,
                              RngStream& rng);

/// Reads an IDX image/label pair, keeps digits `digit_a` (+1) and `digit_b`
/// (-1), scales pixels to byte/255 and then globally so max row norm = R.
Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path, int digit_a, int digit_b,
                         double radius);

/// Certified (L0, L1) of the exp-loss classifier for data bounded by R:
///   L1 = (1 + rho) sqrt(d) R^2 / lambda
///   L0 = max(L1 (R + d lambda), (R^2 + d lambda^2) (n (R^2 + d lambda^2) / (rho1 R^2))^(1 + 1/rho2))
/// with rho = rho1 + rho2. Requires 0 < lambda < R.
SmoothnessConstants exp_loss_constants(double radius, std::size_t d, double lambda,
                                       std::size_t n, double rho1, double rho2,
                                       double c = 0.1);

}  // namespace cliplab
