#pragma once
// Test-only helpers: scratch directories and reference implementations that
// deliberately avoid the library code paths they are compared against.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cliplab/objectives.hpp"

namespace cliplab::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cliplab-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

/// Plain clipped SGD on the noisy quadratic, x <- x - min(eta, gamma/|g|) g with
/// g = x + xi, drawing xi from its own stream.
inline std::vector<double> reference_clipped_sgd(double x0, double eta, double gamma, int steps,
                                                 RngStream rng) {
  std::vector<double> xs{x0};
  double x = x0;
  for (int t = 0; t < steps; ++t) {
    const double g = x + rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
    const double a = std::abs(g);
    const double c = a == 0.0 ? eta : std::min(eta, gamma / a);
    x = x - c * g;
    xs.push_back(x);
  }
  return xs;
}

/// Hessian of (1/n) sum exp(-y <w, x_i>) + sum (cosh(lambda w_k) - 1),
/// assembled from the data.
inline Eigen::MatrixXd exp_loss_hessian(const Dataset& data, double lambda,
                                        const std::vector<double>& w) {
  const auto d = static_cast<Eigen::Index>(data.d);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < data.n; ++i) {
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      z(k) = -data.labels[i] * data.points[i * data.d + static_cast<std::size_t>(k)];
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) s += z(k) * w[static_cast<std::size_t>(k)];
    h += std::exp(s) * z * z.transpose();
  }
  h /= static_cast<double>(data.n);
  for (Eigen::Index k = 0; k < d; ++k) {
    h(k, k) += lambda * lambda * std::cosh(lambda * w[static_cast<std::size_t>(k)]);
  }
  return h;
}

inline double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace cliplab::testing
