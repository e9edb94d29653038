#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cliplab {

enum class ErrorKind {
  invalid_input,
  dimension_mismatch,
  non_finite,
  capability,
  precondition,
  format,
  non_convergence,
  overflow,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. `kind` lets callers (the CLI in particular) map
/// failures onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dense vector of optimization variables. The dimension is fixed at
/// construction; arithmetic between vectors of different sizes throws.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double scale) noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector lhs, const ParamVector& rhs);
ParamVector operator-(ParamVector lhs, const ParamVector& rhs);
ParamVector operator*(double scale, ParamVector v);

void require_same_dim(std::size_t a, std::size_t b, const char* context);

/// Throws `Error{non_finite}` naming the first offending coordinate.
void require_finite(std::span<const double> v, const char* context);

/// Euclidean norm. Throws on non-finite entries.
double l2_norm(std::span<const double> v);

/// Euclidean norm without the finiteness check, for hot loops whose inputs are
/// already validated.
double l2_norm_unchecked(std::span<const double> v) noexcept;

double dot(std::span<const double> a, std::span<const double> b);

/// Distance in units in the last place between two doubles of the same sign;
/// used by the ulp-level equivalence checks.
std::uint64_t ulp_distance(double a, double b) noexcept;

}  // namespace cliplab
