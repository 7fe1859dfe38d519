#pragma once

/**
 * \file kinematics.hpp
 * \brief Finite-strain kinematics for incompressible uniaxial tension and pure torsion.
 *
 * Units are fixed throughout the library: lengths in mm, time in s, stress in MPa,
 * torque in N*mm. All tensors are dimensionless 3x3 matrices in double precision.
 */

#include <picnn/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <utility>

namespace picnn {

using Tensor3 = Eigen::Matrix3d;

/// First and second isochoric invariants plus the Jacobian.
struct IsochoricInvariants
{
  double i1_bar = 3.0;
  double i2_bar = 3.0;
  double jacobian = 1.0;
};

struct TensionState
{
  double stretch = 1.0;
  double time = 0.0;
};

struct TorsionGeometry
{
  double length = 57.0; // mm
  double radius = 5.0;  // mm

  /// Polar moment of inertia (pi/2) R^4 of the solid rod, mm^4.
  [[nodiscard]] double polar_moment() const { return 0.5 * M_PI * std::pow(radius, 4); }
};

inline constexpr double kDegeneracyThreshold = 1e-14;

namespace detail {

inline void require_positive_stretch(double stretch)
{
  if (!(stretch > 0.0) || !std::isfinite(stretch))
    throw DomainError("stretch must be positive and finite, got " + std::to_string(stretch));
}

} // namespace detail

/// Closed-form inverse through the adjugate. Rejects |det C| below 1e-14.
inline Tensor3 inverse3(const Tensor3& a)
{
  Tensor3 adj;
  adj(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  adj(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
  adj(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
  adj(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
  adj(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
  adj(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
  adj(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
  adj(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
  adj(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  const double det = a(0, 0) * adj(0, 0) + a(0, 1) * adj(1, 0) + a(0, 2) * adj(2, 0);
  if (!(std::abs(det) > kDegeneracyThreshold))
    throw DomainError("tensor is singular (det = " + std::to_string(det) + ")");
  return adj / det;
}

inline Tensor3 tension_deformation_gradient(const TensionState& state)
{
  detail::require_positive_stretch(state.stretch);
  const double lateral = 1.0 / std::sqrt(state.stretch);
  return Eigen::Vector3d(state.stretch, lateral, lateral).asDiagonal();
}

/// C = diag(lambda^2, 1/lambda, 1/lambda).
inline Tensor3 tension_cauchy_green(const TensionState& state)
{
  detail::require_positive_stretch(state.stretch);
  const double l = state.stretch;
  return Eigen::Vector3d(l * l, 1.0 / l, 1.0 / l).asDiagonal();
}

inline IsochoricInvariants tension_invariants(const TensionState& state)
{
  detail::require_positive_stretch(state.stretch);
  const double l = state.stretch;
  return {l * l + 2.0 / l, 2.0 * l + 1.0 / (l * l), 1.0};
}

/// Deformation gradient of the twisted rod at radius r in the (r, theta, z) frame.
inline Tensor3 torsion_deformation_gradient(double radius, double twist, const TorsionGeometry& geom)
{
  if (!(radius >= 0.0) || radius > geom.radius)
    throw DomainError("radius outside [0, R]");
  Tensor3 f = Tensor3::Identity();
  f(1, 2) = twist / geom.length * radius;
  return f;
}

/// Both invariants equal 3 + (r phi / L)^2 at J = 1.
inline IsochoricInvariants torsion_invariants(double radius, double twist, const TorsionGeometry& geom)
{
  if (!(geom.length > 0.0) || !(geom.radius > 0.0))
    throw DomainError("torsion geometry requires L > 0 and R > 0");
  if (!(radius >= 0.0) || radius > geom.radius)
    throw DomainError("radius " + std::to_string(radius) + " outside [0, R]");
  const double shear = radius * twist / geom.length;
  const double inv = 3.0 + shear * shear;
  return {inv, inv, 1.0};
}

/// Isochoric invariants of an arbitrary right Cauchy-Green tensor.
inline IsochoricInvariants isochoric_invariants(const Tensor3& c)
{
  const double det = c.determinant();
  if (!(det > kDegeneracyThreshold))
    throw DomainError("right Cauchy-Green tensor must have positive determinant");
  const double j = std::sqrt(det);
  const double tr = c.trace();
  const double tr2 = (c * c).trace();
  const double j23 = std::pow(j, -2.0 / 3.0);
  return {j23 * tr, j23 * j23 * 0.5 * (tr * tr - tr2), j};
}

/// Returns (dI1bar/dC, dI2bar/dC) for symmetric positive definite C.
inline std::pair<Tensor3, Tensor3> isochoric_invariant_derivatives(const Tensor3& c)
{
  const Tensor3 c_inv = inverse3(c);
  const double det = c.determinant();
  if (!(det > kDegeneracyThreshold))
    throw DomainError("right Cauchy-Green tensor must have positive determinant");
  const double j = std::sqrt(det);
  const double j23 = std::pow(j, -2.0 / 3.0);
  const double j43 = j23 * j23;
  const double tr = c.trace();
  const double tr2 = (c * c).trace();
  const double i1_bar = j23 * tr;

  Tensor3 d_i1 = j23 * (Tensor3::Identity() - (tr / 3.0) * c_inv);
  Tensor3 d_i2 = i1_bar * d_i1 - j43 * c + (j43 * tr2 / 3.0) * c_inv;
  // symmetric by construction for symmetric C; remove round-off skew
  d_i1 = 0.5 * (d_i1 + d_i1.transpose()).eval();
  d_i2 = 0.5 * (d_i2 + d_i2.transpose()).eval();
  return {d_i1, d_i2};
}

/// Constraint-free second Piola-Kirchhoff stress S' = 2 dPsi/dC.
inline Tensor3 second_pk_deviatoric(const Tensor3& c, double dpsi_di1, double dpsi_di2)
{
  const auto [d_i1, d_i2] = isochoric_invariant_derivatives(c);
  return 2.0 * (dpsi_di1 * d_i1 + dpsi_di2 * d_i2);
}

/// sigma = J^-1 F S F^T.
inline Tensor3 push_forward(const Tensor3& f, const Tensor3& s)
{
  const double j = f.determinant();
  if (!(j > 0.0))
    throw DomainError("deformation gradient must have positive determinant");
  Tensor3 sigma = (f * s * f.transpose()) / j;
  return 0.5 * (sigma + sigma.transpose());
}

/// Incompressible uniaxial stress sigma11 = sigma'11 - sigma'22 for given energy partials.
inline double tension_axial_stress(double stretch, double dpsi_di1, double dpsi_di2)
{
  const TensionState state{stretch, 0.0};
  const Tensor3 sigma =
      push_forward(tension_deformation_gradient(state), second_pk_deviatoric(tension_cauchy_green(state), dpsi_di1, dpsi_di2));
  return sigma(0, 0) - sigma(1, 1);
}

/// Coefficients (k1, k2) with sigma11 = k1 dPsi/dI1 + k2 dPsi/dI2; the stress is linear in the partials.
inline std::pair<double, double> tension_stress_coefficients(double stretch)
{
  return {tension_axial_stress(stretch, 1.0, 0.0), tension_axial_stress(stretch, 0.0, 1.0)};
}

/// Nominal (first Piola-Kirchhoff) axial stress for plotting, P = sigma11 / lambda.
inline double nominal_from_cauchy(double sigma11, double stretch) { return sigma11 / stretch; }

} // namespace picnn
