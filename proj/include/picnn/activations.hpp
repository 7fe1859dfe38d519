#pragma once

#include <algorithm>
#include <cmath>

namespace picnn {

/// log(1 + e^x) without overflow for large |x|.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x)
{
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace picnn
