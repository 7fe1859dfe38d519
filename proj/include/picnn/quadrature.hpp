#pragma once

#include <picnn/errors.hpp>

#include <cmath>
#include <vector>

namespace picnn {

/// Gauss-Legendre rule of a fixed order mapped to [a, b].
struct GaussLegendre
{
  std::vector<double> nodes;
  std::vector<double> weights;

  GaussLegendre(int order, double a, double b)
  {
    if (order < 1)
      throw ConfigError("quadrature order must be positive");
    nodes.resize(order);
    weights.resize(order);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    // Newton iteration on P_n from the Chebyshev-like initial guess, symmetric pairs
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= order; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (order == 1) {
          p1 = x;
          p0 = 1.0;
        }
        dp = order * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16)
          break;
      }
      // recompute derivative at the converged root
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order == 1 ? 1.0 : order * (x * p1 - p0) / (x * x - 1.0);
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = mid - half * x;
      nodes[order - 1 - i] = mid + half * x;
      weights[i] = weights[order - 1 - i] = half * w;
    }
  }

  template <class F>
  double integrate(F&& f) const
  {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      s += weights[i] * f(nodes[i]);
    return s;
  }
};

} // namespace picnn
