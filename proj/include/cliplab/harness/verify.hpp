#pragma once

#include <string>
#include <vector>

#include "cliplab/harness/csv.hpp"
#include "cliplab/theory.hpp"

namespace cliplab::harness {

struct VerifyOptions {
  /// Multiplies every certified (L0, L1) pair; values below 1 are a mutation
  /// test of the checkers themselves.
  double scale_constants = 1.0;
  std::size_t workers = 1;
  std::uint64_t seed = 2020;
};

/// Runs one of: lemmas, oracles, equivalences, envelope, all.
std::vector<CheckResult> verify_suite(const std::string& suite, const VerifyOptions& options);

/// objective, check_name, samples, violations, max_residual
CsvTable report_table(const std::vector<CheckResult>& rows);

/// Largest |eigenvalue| of the Hessian assembled column by column from the
/// analytic Hessian-vector product (dense symmetric eigensolver).
double dense_hessian_norm(const Objective& obj, std::span<const double> x);

}  // namespace cliplab::harness
