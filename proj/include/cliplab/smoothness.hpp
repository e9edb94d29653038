#pragma once

namespace cliplab {

/// Constants of the (L0, L1) descent inequality for step radius c / L1:
/// A = 1 + e^c - (e^c - 1)/c, B = (e^c - 1)/c.
struct ABConstants {
  double a;
  double b;
};

ABConstants ab_constants(double c);

/// (L0, L1) pair together with the radius parameter c and the derived (A, B).
struct SmoothnessConstants {
  double l0 = 0.0;
  double l1 = 0.0;
  double c = 0.1;
  double a = 1.0;
  double b = 1.0;

  static SmoothnessConstants make(double l0, double l1, double c = 0.1);

  /// Largest admissible step ||x+ - x|| for the local lemmas.
  double radius() const noexcept { return c / l1; }
};

}  // namespace cliplab
