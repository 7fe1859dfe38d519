#pragma once

#include <picnn/potential_net.hpp>

#include <random>

namespace picnn::fixtures {

/// Constrained random model with weights of order `scale` and a spread of gate locations.
inline PicnnModel random_model(std::mt19937_64& rng, double scale = 1.0, PicnnArchitecture arch = {})
{
  PicnnModel m(std::move(arch));
  initialize_parameters(m, rng);
  std::normal_distribution<double> la(1.0, 2.0);
  for (auto& g : m.matrices()) {
    g.theta_bar *= 10.0 * scale;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g.log_alpha.reshaped()(i) = la(rng);
  }
  m.project_nonnegative();
  return m;
}

inline PicnnArchitecture small_architecture()
{
  PicnnArchitecture a;
  a.convex_widths = {4, 3};
  a.nc_widths = {2, 3};
  a.coupling_width = 2;
  return a;
}

} // namespace picnn::fixtures
