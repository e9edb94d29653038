#include "cliplab/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>

namespace cliplab {

void Dataset::validate() const {
  if (n == 0 || d == 0) throw Error(ErrorKind::invalid_input, "dataset is empty");
  if (points.size() != n * d || labels.size() != n) {
    throw Error(ErrorKind::invalid_input, "dataset storage does not match n x d");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 1 && labels[i] != -1) {
      throw Error(ErrorKind::invalid_input, "label " + std::to_string(i) + " is not +-1");
    }
    require_finite(row(i), "dataset row");
    if (l2_norm_unchecked(row(i)) > radius * (1.0 + 1e-12)) {
      throw Error(ErrorKind::invalid_input, "row " + std::to_string(i) + " exceeds radius");
    }
  }
}

Objective make_quartic() {
  Objective::Parts p;
  p.name = "quartic";
  p.dim = 1;
  p.value = [](std::span<const double> x) {
    const double s = x[0] * x[0];
    return s * s;
  };
  p.grad = [](std::span<const double> x, std::span<double> out) {
    out[0] = 4.0 * x[0] * x[0] * x[0];
  };
  p.hvp = [](std::span<const double> x, std::span<const double> v, std::span<double> out) {
    out[0] = 12.0 * x[0] * x[0] * v[0];
  };
  p.f_star = 0.0;
  return Objective(std::move(p));
}

Objective make_poly2d() {
  Objective::Parts p;
  p.name = "poly2d";
  p.dim = 2;
  // u = y - 3x + 2; grad = (2x - 12u^3, 4u^3); Hessian = diag(2, 0) + 12u^2 [9 -3; -3 1].
  p.value = [](std::span<const double> x) {
    const double u = x[1] - 3.0 * x[0] + 2.0;
    const double u2 = u * u;
    return x[0] * x[0] + u2 * u2;
  };
  p.grad = [](std::span<const double> x, std::span<double> out) {
    const double u = x[1] - 3.0 * x[0] + 2.0;
    const double u3 = u * u * u;
    out[0] = 2.0 * x[0] - 12.0 * u3;
    out[1] = 4.0 * u3;
  };
  p.hvp = [](std::span<const double> x, std::span<const double> v, std::span<double> out) {
    const double u = x[1] - 3.0 * x[0] + 2.0;
    const double k = 12.0 * u * u;
    const double proj = v[1] - 3.0 * v[0];
    out[0] = 2.0 * v[0] - 3.0 * k * proj;
    out[1] = k * proj;
  };
  p.f_star = 0.0;
  return Objective(std::move(p));
}

Objective make_noisy_quadratic() {
  Objective::Parts p;
  p.name = "noisy_quadratic";
  p.dim = 1;
  p.value = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
  p.grad = [](std::span<const double> x, std::span<double> out) { out[0] = x[0]; };
  p.hvp = [](std::span<const double>, std::span<const double> v, std::span<double> out) {
    out[0] = v[0];
  };
  p.noisy_grad = [](std::span<const double> x, RngStream& rng, std::span<double> out) {
    out[0] = x[0] + uniform_unit_variance_noise(rng);
  };
  p.f_star = 0.0;
  p.noise_bound_sigma = std::numbers::sqrt3;
  return Objective(std::move(p));
}

namespace {

struct ExpLossData {
  Dataset data;
  double lambda;
  // z_i = -y_i x_i, row-major.
  std::vector<double> z;

  double margin_exponent(std::size_t i, std::span<const double> w) const {
    double s = 0.0;
    const double* zi = z.data() + i * data.d;
    for (std::size_t k = 0; k < data.d; ++k) s += w[k] * zi[k];
    if (!(s <= kExpLossMaxExponent)) {
      throw Error(ErrorKind::overflow,
                  "exp-loss exponent " + std::to_string(s) + " at sample " + std::to_string(i));
    }
    return s;
  }

  void check_regularizer(std::span<const double> w) const {
    for (std::size_t k = 0; k < data.d; ++k) {
      if (!(std::abs(lambda * w[k]) <= kExpLossMaxExponent)) {
        throw Error(ErrorKind::overflow, "exp-loss regularizer exponent at coordinate " +
                                             std::to_string(k));
      }
    }
  }

  double value(std::span<const double> w) const {
    check_regularizer(w);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) loss += std::exp(margin_exponent(i, w));
    loss /= static_cast<double>(data.n);
    double reg = 0.0;
    for (std::size_t k = 0; k < data.d; ++k) {
      // cosh(a) - 1 = 2 sinh^2(a/2), exact near zero.
      const double s = std::sinh(0.5 * lambda * w[k]);
      reg += 2.0 * s * s;
    }
    return loss + reg;
  }

  void add_regularizer_grad(std::span<const double> w, std::span<double> out) const {
    for (std::size_t k = 0; k < data.d; ++k) out[k] += lambda * std::sinh(lambda * w[k]);
  }

  void grad_over(std::span<const double> w, std::span<double> out, const std::size_t* indices,
                 std::size_t count) const {
    check_regularizer(w);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = indices ? indices[j] : j;
      const double e = std::exp(margin_exponent(i, w));
      const double* zi = z.data() + i * data.d;
      for (std::size_t k = 0; k < data.d; ++k) out[k] += e * zi[k];
    }
    for (double& o : out) o /= static_cast<double>(count);
    add_regularizer_grad(w, out);
  }

  void hvp(std::span<const double> w, std::span<const double> v, std::span<double> out) const {
    check_regularizer(w);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < data.n; ++i) {
      const double e = std::exp(margin_exponent(i, w));
      const double* zi = z.data() + i * data.d;
      double zv = 0.0;
      for (std::size_t k = 0; k < data.d; ++k) zv += zi[k] * v[k];
      for (std::size_t k = 0; k < data.d; ++k) out[k] += e * zv * zi[k];
    }
    for (double& o : out) o /= static_cast<double>(data.n);
    for (std::size_t k = 0; k < data.d; ++k) {
      out[k] += lambda * lambda * std::cosh(lambda * w[k]) * v[k];
    }
  }
};

}  // namespace

Objective make_exp_loss(Dataset data, double lambda, ExpLossOptions options) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::invalid_input, "exp-loss lambda must be positive");
  }
  data.validate();
  auto state = std::make_shared<ExpLossData>();
  state->lambda = lambda;
  state->z.resize(data.points.size());
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t k = 0; k < data.d; ++k) {
      state->z[i * data.d + k] = -static_cast<double>(data.labels[i]) * data.points[i * data.d + k];
    }
  }
  state->data = std::move(data);

  Objective::Parts p;
  p.name = "exp_loss";
  p.dim = state->data.d;
  p.value = [state](std::span<const double> w) { return state->value(w); };
  p.grad = [state](std::span<const double> w, std::span<double> out) {
    state->grad_over(w, out, nullptr, state->data.n);
  };
  p.hvp = [state](std::span<const double> w, std::span<const double> v, std::span<double> out) {
    state->hvp(w, v, out);
  };
  if (options.batch_size > 0) {
    const std::size_t batch = options.batch_size;
    p.noisy_grad = [state, batch](std::span<const double> w, RngStream& rng,
                                  std::span<double> out) {
      // Sampling with replacement keeps the estimator unbiased for any batch size.
      std::vector<std::size_t> idx(batch);
      for (auto& i : idx) i = static_cast<std::size_t>(rng.next_u64() % state->data.n);
      state->grad_over(w, out, idx.data(), batch);
    };
  }
  return Objective(std::move(p));
}

namespace {

void rescale_to_radius(Dataset& ds) {
  double max_norm = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) max_norm = std::max(max_norm, l2_norm(ds.row(i)));
  if (max_norm > 0.0) {
    const double scale = ds.radius / max_norm;
    for (double& v : ds.points) v *= scale;
  }
}

}  // namespace

Dataset gen_synthetic_dataset(std::size_t n, std::size_t d, double radius, double margin,
                              RngStream& rng) {
  if (n < 2 || d < 1 || !(radius > 0.0) || !std::isfinite(radius) || !(margin >= 0.0) ||
      !std::isfinite(margin)) {
    throw Error(ErrorKind::invalid_input, "gen_synthetic_dataset: need n >= 2, d >= 1, R > 0, "
                                          "finite margin >= 0");
  }
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.radius = radius;
  ds.points.resize(n * d);
  ds.labels.resize(n);
  const double offset = 0.5 * margin / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = (i % 2 == 0) ? 1 : -1;
    ds.labels[i] = label;
    for (std::size_t k = 0; k < d; ++k) ds.points[i * d + k] = label * offset + rng.normal();
  }
  rescale_to_radius(ds);
  return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(ErrorKind::format, what + ": truncated header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::format, "cannot open " + path.string());
  return in;
}

}  // namespace

Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path, int digit_a, int digit_b,
                         double radius) {
  if (digit_a == digit_b) throw Error(ErrorKind::invalid_input, "digits must differ");
  if (!(radius > 0.0)) throw Error(ErrorKind::invalid_input, "radius must be positive");

  auto images = open_binary(images_path);
  if (read_be32(images, "images") != 0x00000803u) {
    throw Error(ErrorKind::format, "images: bad magic number (expected 0x00000803)");
  }
  const std::uint32_t n_images = read_be32(images, "images");
  const std::uint32_t rows = read_be32(images, "images");
  const std::uint32_t cols = read_be32(images, "images");

  auto labels = open_binary(labels_path);
  if (read_be32(labels, "labels") != 0x00000801u) {
    throw Error(ErrorKind::format, "labels: bad magic number (expected 0x00000801)");
  }
  const std::uint32_t n_labels = read_be32(labels, "labels");
  if (n_images != n_labels) {
    throw Error(ErrorKind::format, "image count " + std::to_string(n_images) +
                                       " does not match label count " + std::to_string(n_labels));
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> label_bytes(n_labels);
  if (!labels.read(reinterpret_cast<char*>(label_bytes.data()),
                   static_cast<std::streamsize>(label_bytes.size()))) {
    throw Error(ErrorKind::format, "labels: truncated data");
  }

  Dataset ds;
  ds.d = pixels;
  ds.radius = radius;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  std::vector<unsigned char> buffer(pixels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!images.read(reinterpret_cast<char*>(buffer.data()),
                     static_cast<std::streamsize>(pixels))) {
      throw Error(ErrorKind::format, "images: truncated data at image " + std::to_string(i));
    }
    const int digit = label_bytes[i];
    if (digit != digit_a && digit != digit_b) continue;
    ds.labels.push_back(digit == digit_a ? 1 : -1);
    (digit == digit_a ? count_a : count_b)++;
    for (unsigned char px : buffer) ds.points.push_back(px / 255.0);
  }
  if (count_a == 0 || count_b == 0) {
    throw Error(ErrorKind::invalid_input,
                "no samples of digit " + std::to_string(count_a == 0 ? digit_a : digit_b));
  }
  ds.n = ds.labels.size();
  rescale_to_radius(ds);
  return ds;
}

SmoothnessConstants exp_loss_constants(double radius, std::size_t d, double lambda,
                                       std::size_t n, double rho1, double rho2, double c) {
  if (!(lambda > 0.0) || !(lambda < radius)) {
    throw Error(ErrorKind::precondition, "exp_loss_constants requires 0 < lambda < R");
  }
  if (!(rho1 > 0.0) || !(rho2 > 0.0) || d == 0 || n == 0) {
    throw Error(ErrorKind::precondition, "exp_loss_constants requires rho1, rho2 > 0, n, d >= 1");
  }
  const double dd = static_cast<double>(d);
  const double r2 = radius * radius;
  const double rho = rho1 + rho2;
  const double l1 = (1.0 + rho) * std::sqrt(dd) / lambda * r2;
  const double spread = r2 + dd * lambda * lambda;
  const double l0 = std::max(l1 * (radius + dd * lambda),
                             spread * std::pow(static_cast<double>(n) * spread / (rho1 * r2),
                                               1.0 + 1.0 / rho2));
  return SmoothnessConstants::make(l0, l1, c);
}

}  // namespace cliplab
