#pragma once

#include <cmath>
#include <numbers>

#include "model.hpp"

namespace fastloo {

/// Standard normal density.
inline double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

/// E_k(theta) = int_theta^inf z^k Dz for k in {0, 1, 2}.
inline double gauss_tail_moment(int k, double theta) {
  switch (k) {
    case 0: return 0.5 * std::erfc(theta / std::numbers::sqrt2);
    case 1: return normal_pdf(theta);
    case 2: return theta * normal_pdf(theta) + 0.5 * std::erfc(theta / std::numbers::sqrt2);
    default: throw InputError("gauss_tail_moment: k must be 0, 1 or 2");
  }
}

/// int_theta^inf (z - theta)^2 Dz = (1 + theta^2) E_0 - theta E_1.
inline double shifted_second_moment(double theta) {
  return (1.0 + theta * theta) * gauss_tail_moment(0, theta) - theta * normal_pdf(theta);
}

/// F evaluated with the scale s = lambda^2 / theta^2 supplied directly; finite
/// as theta -> 0.
inline double F_scaled(double theta, double scale) { return scale * shifted_second_moment(theta); }

/// G evaluated with s = lambda^2 / theta^2: theta^3 / lambda^2 * phi = theta phi / s.
inline double G_scaled(double theta, double scale) { return theta * normal_pdf(theta) / scale; }

/// F(theta) = lambda^2 { E_0 - phi(theta)/theta + E_0/theta^2 }.
inline double F_func(double theta, double lambda) {
  if (!(theta > 0.0)) throw InputError("F_func requires theta > 0");
  const double e0 = gauss_tail_moment(0, theta);
  return lambda * lambda * (e0 - normal_pdf(theta) / theta + e0 / (theta * theta));
}

/// G(theta) = theta^3 / lambda^2 * phi(theta).
inline double G_func(double theta, double lambda) {
  if (!(theta > 0.0) || !(lambda > 0.0)) throw InputError("G_func requires theta > 0 and lambda > 0");
  return theta * theta * theta / (lambda * lambda) * normal_pdf(theta);
}

}  // namespace fastloo
