#pragma once

#include <cmath>

#include "vecsac/errors.hpp"

namespace vecsac {

/// h(x) = sign(x) (sqrt(|x| + 1) - 1) + eps x
inline double value_rescale(double x, double eps) {
  if (!(eps > 0)) throw ConfigError("rescale eps must be positive");
  return std::copysign(std::sqrt(std::abs(x) + 1) - 1, x) + eps * x;
}

/// Closed-form inverse of value_rescale. With s = sqrt(1 + 4 eps (|y| + 1 + eps)),
/// sqrt(|x| + 1) = 2 (|y| + 1 + eps) / (1 + s), which avoids cancellation.
inline double value_rescale_inverse(double y, double eps) {
  if (!(eps > 0)) throw ConfigError("rescale eps must be positive");
  const double a = std::abs(y);
  const double s = std::sqrt(1 + 4 * eps * (a + 1 + eps));
  const double q = 2 * (a + 1 + eps) / (1 + s);
  return std::copysign((q - 1) * (q + 1), y);
}

/// h with a pass-through mode for tests and for scalar-equivalence checks.
struct ValueRescale {
  double eps = 1e-3;
  bool identity = false;

  double apply(double x) const { return identity ? x : value_rescale(x, eps); }
  double invert(double y) const { return identity ? y : value_rescale_inverse(y, eps); }
};

}  // namespace vecsac
