#include "cliplab/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace cliplab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::capability: return "missing capability";
    case ErrorKind::precondition: return "precondition violated";
    case ErrorKind::format: return "format error";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::overflow: return "overflow";
  }
  return "unknown";
}

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_dim(size(), other.size(), "ParamVector +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_dim(size(), other.size(), "ParamVector -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) noexcept {
  for (double& v : values_) v *= scale;
  return *this;
}

ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
ParamVector operator*(double scale, ParamVector v) { return v *= scale; }

void require_same_dim(std::size_t a, std::size_t b, const char* context) {
  if (a != b) {
    throw Error(ErrorKind::dimension_mismatch, std::string(context) + ": dimensions " +
                                                   std::to_string(a) + " and " +
                                                   std::to_string(b) + " differ");
  }
}

void require_finite(std::span<const double> v, const char* context) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorKind::non_finite,
                  std::string(context) + ": coordinate " + std::to_string(i) + " is not finite");
    }
  }
}

double l2_norm_unchecked(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  if (sum > 0x1p-900 && sum < 0x1p900) return std::sqrt(sum);
  // Squares overflowed or lost precision to underflow; rescale by the largest entry.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return std::sqrt(sum);
  sum = 0.0;
  for (double x : v) {
    const double r = x / scale;
    sum += r * r;
  }
  return scale * std::sqrt(sum);
}

double l2_norm(std::span<const double> v) {
  require_finite(v, "l2_norm");
  return l2_norm_unchecked(v);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

std::uint64_t ulp_distance(double a, double b) noexcept {
  if (a == b) return 0;
  // Map the IEEE bit patterns onto a monotone integer line.
  auto key = [](double x) {
    auto bits = std::bit_cast<std::int64_t>(x);
    return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
  };
  const std::int64_t ka = key(a);
  const std::int64_t kb = key(b);
  return ka > kb ? static_cast<std::uint64_t>(ka) - static_cast<std::uint64_t>(kb)
                 : static_cast<std::uint64_t>(kb) - static_cast<std::uint64_t>(ka);
}

}  // namespace cliplab
