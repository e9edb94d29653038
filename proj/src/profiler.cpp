#include "cliplab/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "cliplab/rng.hpp"

namespace cliplab {

namespace {

ParamVector apply_hessian(const Objective& obj, std::span<const double> x,
                          std::span<const double> v) {
  if (obj.has_hvp()) return obj.hvp(x, v);
  return hvp_fd(obj, x, v, default_fd_step(x));
}

double normalize(ParamVector& v) {
  const double n = l2_norm(v.span());
  if (n > 0.0) v *= 1.0 / n;
  return n;
}

ParamVector random_unit(std::size_t dim, RngStream& rng) {
  ParamVector v(dim);
  do {
    for (double& a : v) a = rng.normal();
  } while (normalize(v) == 0.0);
  return v;
}

struct RitzResult {
  double value = 0.0;   // largest |Ritz value|
  ParamVector vector;   // its Ritz vector (unit)
  bool invariant = false;  // the Krylov space closed before `block` steps
  std::vector<ParamVector> basis;
};

// One restarted-Lanczos cycle of at most `block` Hessian products from unit v,
// with full reorthogonalization. Power iteration is the block = 1 special case.
RitzResult lanczos_cycle(const Objective& obj, std::span<const double> x, const ParamVector& v,
                         std::size_t block) {
  const std::size_t n = v.size();
  std::vector<ParamVector> q{v};
  std::vector<double> alpha, beta;
  bool invariant = false;
  for (std::size_t j = 0; j < block; ++j) {
    ParamVector w = apply_hessian(obj, x, q[j].span());
    alpha.push_back(dot(q[j].span(), w.span()));
    const double scale = l2_norm(w.span());
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qi : q) {
        const double c = dot(qi.span(), w.span());
        for (std::size_t i = 0; i < n; ++i) w[i] -= c * qi[i];
      }
    }
    if (j + 1 == block) break;
    const double b = l2_norm(w.span());
    if (b <= 1e-13 * std::max(scale, std::abs(alpha.back())) || b == 0.0) {
      invariant = true;
      break;
    }
    beta.push_back(b);
    w *= 1.0 / b;
    q.push_back(std::move(w));
  }
  const auto k = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
  Eigen::Index best = 0;
  eig.eigenvalues().cwiseAbs().maxCoeff(&best);
  RitzResult r;
  r.value = std::abs(eig.eigenvalues()(best));
  r.vector = ParamVector(n);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double s = eig.eigenvectors()(i, best);
    for (std::size_t c = 0; c < n; ++c) r.vector[c] += s * q[static_cast<std::size_t>(i)][c];
  }
  normalize(r.vector);
  r.invariant = invariant || static_cast<std::size_t>(k) == n;
  r.basis = std::move(q);
  r.basis.resize(static_cast<std::size_t>(k));
  return r;
}

ParamVector orthogonal_start(const std::vector<ParamVector>& basis, std::size_t dim,
                             RngStream& rng) {
  for (int attempt = 0; attempt < 4; ++attempt) {
    ParamVector w = random_unit(dim, rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qi : basis) {
        const double c = dot(qi.span(), w.span());
        for (std::size_t i = 0; i < dim; ++i) w[i] -= c * qi[i];
      }
    }
    if (normalize(w) > 1e-8) return w;
  }
  return ParamVector();
}

}  // namespace

double hessian_spectral_norm(const Objective& obj, std::span<const double> x,
                             const PowerIterationOptions& options) {
  require_same_dim(x.size(), obj.dim(), "hessian_spectral_norm");
  require_finite(x, "hessian_spectral_norm");
  // Finite-difference products carry ~1e-8 relative noise.
  const double tol = obj.has_hvp() ? options.tol : std::max(options.tol, 1e-7);
  const std::size_t dim = obj.dim();
  const std::size_t block = std::min<std::size_t>(dim, 20);
  RngStream rng(options.seed, 0);
  ParamVector v = random_unit(dim, rng);
  bool restarted = false;
  double estimate = -1.0;
  double floor = 0.0;  // best value found in an abandoned subspace

  for (int it = 1; it <= options.max_iters; ++it) {
    RitzResult r = lanczos_cycle(obj, x, v, block);
    const bool stalled = r.value <= tol * 10.0 * std::max(1.0, floor);
    if (r.invariant || stalled) {
      // Exact on this Krylov space. Unless it spans everything, look once more
      // from a direction orthogonal to it.
      if (restarted || r.basis.size() == dim) return std::max(r.value, floor);
      restarted = true;
      ParamVector w = orthogonal_start(r.basis, dim, rng);
      if (w.empty()) return std::max(r.value, floor);
      floor = std::max(floor, r.value);
      v = std::move(w);
      estimate = -1.0;
      continue;
    }
    if (std::abs(r.value - estimate) <= tol * r.value) return std::max(r.value, floor);
    estimate = r.value;
    v = std::move(r.vector);
  }
  throw Error(ErrorKind::non_convergence,
              "power iteration did not converge after " + std::to_string(options.max_iters) +
                  " iterations; last estimate " + std::to_string(estimate));
}

std::vector<LandscapeSample> sample_landscape(const Objective& obj,
                                              const std::vector<ParamVector>& points,
                                              const PowerIterationOptions& options) {
  if (points.empty()) throw Error(ErrorKind::invalid_input, "sample_landscape: no points");
  std::vector<LandscapeSample> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      LandscapeSample s;
      s.grad_norm = l2_norm(obj.grad(points[i].span()).span());
      s.hess_norm = hessian_spectral_norm(obj, points[i].span(), options);
      s.tag = static_cast<std::int64_t>(i);
      out.push_back(s);
    } catch (const Error& e) {
      throw Error(e.kind(), "landscape point " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ParamVector> grid_points(std::span<const double> low, std::span<const double> high,
                                     std::size_t per_dim) {
  require_same_dim(low.size(), high.size(), "grid_points");
  if (low.empty() || per_dim < 2) {
    throw Error(ErrorKind::invalid_input, "grid_points needs a dimension and >= 2 points per axis");
  }
  const std::size_t dim = low.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim; ++k) total *= per_dim;
  std::vector<ParamVector> points;
  points.reserve(total);
  std::vector<std::size_t> idx(dim, 0);
  for (std::size_t p = 0; p < total; ++p) {
    ParamVector x(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      x[k] = low[k] + (high[k] - low[k]) * static_cast<double>(idx[k]) /
                          static_cast<double>(per_dim - 1);
    }
    points.push_back(std::move(x));
    for (std::size_t k = dim; k-- > 0;) {
      if (++idx[k] < per_dim) break;
      idx[k] = 0;
    }
  }
  return points;
}

std::int64_t count_envelope_violations(std::span<const LandscapeSample> samples, double l0,
                                       double l1) {
  std::int64_t count = 0;
  for (const auto& s : samples) {
    if (s.hess_norm > l0 + l1 * s.grad_norm) ++count;
  }
  return count;
}

EnvelopeFit fit_l0_l1(std::span<const LandscapeSample> samples, std::size_t n_bins) {
  if (samples.empty()) throw Error(ErrorKind::invalid_input, "fit_l0_l1: no samples");
  if (n_bins < 2) throw Error(ErrorKind::invalid_input, "fit_l0_l1: need at least 2 bins");
  const bool identical = std::all_of(samples.begin(), samples.end(), [&](const auto& s) {
    return s.grad_norm == samples[0].grad_norm && s.hess_norm == samples[0].hess_norm;
  });
  if (identical) throw Error(ErrorKind::invalid_input, "fit_l0_l1: all samples identical");

  double g_min = std::numeric_limits<double>::infinity();
  double g_max = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.grad_norm) || !std::isfinite(s.hess_norm) || s.grad_norm < 0.0 ||
        s.hess_norm < 0.0) {
      throw Error(ErrorKind::invalid_input, "fit_l0_l1: sample norms must be finite and >= 0");
    }
    if (s.grad_norm > 0.0) g_min = std::min(g_min, s.grad_norm);
    g_max = std::max(g_max, s.grad_norm);
  }

  // Per-bin maximum of the Hessian norm, kept with the gradient norm where it occurs.
  struct Bin {
    bool used = false;
    double g = 0.0;
    double h = -1.0;
  };
  std::vector<Bin> bins(n_bins);
  const double log_span = (g_max > g_min) ? std::log(g_max / g_min) : 0.0;
  for (const auto& s : samples) {
    std::size_t b = 0;
    if (s.grad_norm > g_min && log_span > 0.0) {
      const double pos = std::log(s.grad_norm / g_min) / log_span * static_cast<double>(n_bins);
      b = std::min(n_bins - 1, static_cast<std::size_t>(pos));
    }
    if (!bins[b].used || s.hess_norm > bins[b].h) bins[b] = {true, s.grad_norm, s.hess_norm};
  }
  std::vector<Bin> used;
  std::copy_if(bins.begin(), bins.end(), std::back_inserter(used), [](const Bin& b) { return b.used; });
  if (used.size() < 2) throw Error(ErrorKind::invalid_input, "fit_l0_l1: fewer than 2 nonempty bins");

  const double k = static_cast<double>(used.size());
  double g_mean = 0.0, h_mean = 0.0;
  for (const auto& b : used) {
    g_mean += b.g;
    h_mean += b.h;
  }
  g_mean /= k;
  h_mean /= k;
  double sgg = 0.0, sgh = 0.0;
  for (const auto& b : used) {
    sgg += (b.g - g_mean) * (b.g - g_mean);
    sgh += (b.g - g_mean) * (b.h - h_mean);
  }
  double l1 = sgg > 0.0 ? sgh / sgg : 0.0;
  double l0 = h_mean - l1 * g_mean;
  // Two-variable nonnegative least squares: pin whichever coefficient went negative.
  if (l1 < 0.0) {
    l1 = 0.0;
    l0 = h_mean;
  } else if (l0 < 0.0) {
    double sg2 = 0.0, sgh0 = 0.0;
    for (const auto& b : used) {
      sg2 += b.g * b.g;
      sgh0 += b.g * b.h;
    }
    l0 = 0.0;
    l1 = sg2 > 0.0 ? sgh0 / sg2 : 0.0;
  }
  if (l0 <= 0.0) {
    // A zero intercept cannot cover curvature at vanishing gradients; start
    // from the smallest-gradient bin maximum.
    l0 = used.front().h;
  }

  double inflation = 1.0;
  for (const auto& s : samples) {
    const double bound = l0 + l1 * s.grad_norm;
    if (bound > 0.0) {
      inflation = std::max(inflation, s.hess_norm / bound);
    } else if (s.hess_norm > 0.0) {
      throw Error(ErrorKind::invalid_input, "fit_l0_l1: envelope cannot cover sample");
    }
  }
  EnvelopeFit fit{l0 * inflation, l1 * inflation, 0, inflation};
  // Rounding in the product can leave a sample one ulp above the line.
  while (count_envelope_violations(samples, fit.l0, fit.l1) > 0) {
    fit.inflation *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
    fit.l0 = l0 * fit.inflation;
    fit.l1 = l1 * fit.inflation;
  }
  fit.violations = count_envelope_violations(samples, fit.l0, fit.l1);
  return fit;
}

namespace {

std::vector<double> ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> r(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double rank_correlation(std::span<const LandscapeSample> samples) {
  std::vector<double> g, h;
  for (const auto& s : samples) {
    if (s.grad_norm > 0.0 && s.hess_norm > 0.0) {
      g.push_back(s.grad_norm);
      h.push_back(s.hess_norm);
    }
  }
  if (g.size() < 2) throw Error(ErrorKind::invalid_input, "rank_correlation: too few samples");
  const auto rg = ranks(g);
  const auto rh = ranks(h);
  const double n = static_cast<double>(rg.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rg.size(); ++i) {
    sxy += (rg[i] - mean) * (rh[i] - mean);
    sxx += (rg[i] - mean) * (rg[i] - mean);
    syy += (rh[i] - mean) * (rh[i] - mean);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cliplab
