#pragma once

/**
 * \file loading.hpp
 * \brief Forward models for incompressible uniaxial tension and torsion of a solid rod.
 *
 * A material enters through its energy partials dPsi/dI1, dPsi/dI2 evaluated on a batch of invariant pairs
 * at a fixed composition. Both measurable outputs are linear in those partials: the axial Cauchy stress
 * sigma11 = k1(lambda) dPsi/dI1 + k2(lambda) dPsi/dI2 and the torque
 * T = 2 pi int_0^R sigma_ztheta(r) r^2 dr with sigma_ztheta = 2 (phi / L) r (dPsi/dI1 + dPsi/dI2).
 * Viscoelasticity is applied to the integrated output; the kernel is linear so this equals relaxing
 * sigma_ztheta pointwise and integrating afterwards.
 */

#include <picnn/errors.hpp>
#include <picnn/kinematics.hpp>
#include <picnn/potential_net.hpp>
#include <picnn/quadrature.hpp>
#include <picnn/viscoelastic.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <string>
#include <vector>

namespace picnn {

enum class LoadingMode { tension, torsion };

inline const char* to_string(LoadingMode m) { return m == LoadingMode::tension ? "tension" : "torsion"; }

inline constexpr int kDefaultQuadratureOrder = 16;

inline double degrees_to_radians(double deg) { return deg * M_PI / 180.0; }
inline double radians_to_degrees(double rad) { return rad * 180.0 / M_PI; }

struct InvariantPartials
{
  Eigen::RowVectorXd d1;
  Eigen::RowVectorXd d2;
};

/// Anything that maps a 2 x N batch of (I1, I2) to the energy partials at a bound composition.
template <class M>
concept EnergyPartials = requires(const M& m, const Eigen::MatrixXd& inv) {
  { m.partials(inv) } -> std::convertible_to<InvariantPartials>;
};

/// Gated pICNN bound to one composition and one gate realization.
class PicnnMaterial
{
public:
  PicnnMaterial(const PicnnModel& model, const GateRealization& gates, double composition)
      : net_(model, gates), c_(composition)
  {}

  [[nodiscard]] InvariantPartials partials(const Eigen::MatrixXd& inv) const
  {
    auto tape = net_.forward(inv, c_);
    return {std::move(tape.out.dpsi_di1), std::move(tape.out.dpsi_di2)};
  }

private:
  EnergyNetwork net_;
  double c_;
};

/// Wraps a point function (i1, i2) -> std::pair<dPsi/dI1, dPsi/dI2>.
template <class F>
class PointwiseMaterial
{
public:
  explicit PointwiseMaterial(F f) : f_(std::move(f)) {}

  [[nodiscard]] InvariantPartials partials(const Eigen::MatrixXd& inv) const
  {
    InvariantPartials out{Eigen::RowVectorXd(inv.cols()), Eigen::RowVectorXd(inv.cols())};
    for (Eigen::Index n = 0; n < inv.cols(); ++n) {
      const auto [a, b] = f_(inv(0, n), inv(1, n));
      out.d1(n) = a;
      out.d2(n) = b;
    }
    return out;
  }

private:
  F f_;
};

/// Mooney-Rivlin stand-in with constant partials (c1, c2); neo-Hookean with shear modulus mu is (mu/2, 0).
inline auto mooney_rivlin(double c1, double c2)
{
  return PointwiseMaterial([c1, c2](double, double) { return std::pair{c1, c2}; });
}

inline auto neo_hookean(double mu) { return mooney_rivlin(0.5 * mu, 0.0); }

struct LoadingProtocol
{
  LoadingMode mode = LoadingMode::tension;
  double rate = 0.09;       // tension: 1/s, torsion: deg/min
  double duration = 1.0;    // s
  double time_step = 0.01;  // s
  double composition = 0.0; // c
  TorsionGeometry geometry{};

  void validate() const
  {
    if (!(rate > 0.0) || !(duration > 0.0) || !(time_step > 0.0))
      throw DomainError("loading protocol requires positive rate, duration and time step");
    if (!(composition >= 0.0))
      throw DomainError("composition must be non-negative");
    if (mode == LoadingMode::torsion && (!(geometry.length > 0.0) || !(geometry.radius > 0.0)))
      throw DomainError("torsion geometry requires L > 0 and R > 0");
  }

  /// Uniform grid from 0 to duration with spacing no larger than time_step.
  [[nodiscard]] std::vector<double> time_grid() const
  {
    validate();
    const auto steps = static_cast<std::size_t>(std::ceil(duration / time_step - 1e-9));
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
      t[k] = duration * static_cast<double>(k) / static_cast<double>(steps);
    return t;
  }

  /// lambda(t) = rate t + 1 for tension, phi(t) = rate t (degrees) for torsion.
  [[nodiscard]] double input_at(double t) const
  {
    return mode == LoadingMode::tension ? 1.0 + rate * t : rate / 60.0 * t;
  }
};

struct ResponseCurve
{
  std::vector<double> times;
  std::vector<double> inputs;             // stretch, or twist in degrees
  std::vector<double> outputs;            // sigma11 (MPa) or torque (N mm)
  std::vector<double> normalized_outputs; // torsion: T L / J_p (MPa); tension: nominal stress (MPa)
};

// ---------------------------------------------------------------------------------------------------------------
// Tension

/// Invariant batch and stress coefficients along a stretch history.
struct TensionBatch
{
  Eigen::MatrixXd invariants;
  Eigen::RowVectorXd k1, k2;
};

inline TensionBatch tension_batch(std::span<const double> stretches)
{
  const auto n = static_cast<Eigen::Index>(stretches.size());
  TensionBatch b{Eigen::MatrixXd(2, n), Eigen::RowVectorXd(n), Eigen::RowVectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto inv = tension_invariants({stretches[i], 0.0});
    b.invariants(0, i) = inv.i1_bar;
    b.invariants(1, i) = inv.i2_bar;
    const auto [k1, k2] = tension_stress_coefficients(stretches[i]);
    b.k1(i) = k1;
    b.k2(i) = k2;
  }
  return b;
}

template <EnergyPartials M>
std::vector<double> tension_instantaneous_curve(std::span<const double> stretches, const M& material)
{
  const auto b = tension_batch(stretches);
  const auto p = material.partials(b.invariants);
  std::vector<double> out(stretches.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = b.k1(i) * p.d1(i) + b.k2(i) * p.d2(i);
  return out;
}

template <EnergyPartials M>
double tension_stress_instantaneous(double stretch, const M& material)
{
  const double s[1] = {stretch};
  return tension_instantaneous_curve(std::span<const double>(s, 1), material)[0];
}

/// sigma11 from a gated pICNN at composition c.
inline double tension_stress_instantaneous(double stretch, double c, const PicnnModel& model, const GateRealization& gates)
{
  return tension_stress_instantaneous(stretch, PicnnMaterial(model, gates, c));
}

// ---------------------------------------------------------------------------------------------------------------
// Torsion

/// Quadrature nodes on [0, R] and the per-node torque factor 2 pi w_q r_q^2 * 2 r_q / L (times phi).
struct TorsionQuadrature
{
  TorsionGeometry geometry;
  std::vector<double> radii;
  std::vector<double> factors;

  TorsionQuadrature(const TorsionGeometry& geom, int order) : geometry(geom)
  {
    if (!(geom.length > 0.0) || !(geom.radius > 0.0))
      throw DomainError("torsion geometry requires L > 0 and R > 0");
    const GaussLegendre rule(order, 0.0, geom.radius);
    radii = rule.nodes;
    for (std::size_t q = 0; q < radii.size(); ++q) {
      const double r = radii[q];
      factors.push_back(2.0 * M_PI * rule.weights[q] * r * r * 2.0 * r / geom.length);
    }
  }

  [[nodiscard]] std::size_t order() const { return radii.size(); }
};

/// Invariant batch (twist-major, node-minor) and torque coefficients along a twist history (radians).
struct TorsionBatch
{
  Eigen::MatrixXd invariants;
  Eigen::RowVectorXd coeff; // T = sum_q coeff_q (dPsi/dI1 + dPsi/dI2)
};

inline TorsionBatch torsion_batch(std::span<const double> twists, const TorsionQuadrature& quad)
{
  const auto nq = static_cast<Eigen::Index>(quad.order());
  const auto n = static_cast<Eigen::Index>(twists.size()) * nq;
  TorsionBatch b{Eigen::MatrixXd(2, n), Eigen::RowVectorXd(n)};
  for (std::size_t k = 0; k < twists.size(); ++k) {
    for (Eigen::Index q = 0; q < nq; ++q) {
      const auto col = static_cast<Eigen::Index>(k) * nq + q;
      const auto inv = torsion_invariants(quad.radii[q], twists[k], quad.geometry);
      b.invariants(0, col) = inv.i1_bar;
      b.invariants(1, col) = inv.i2_bar;
      b.coeff(col) = quad.factors[q] * twists[k];
    }
  }
  return b;
}

template <EnergyPartials M>
std::vector<double> torsion_instantaneous_curve(std::span<const double> twists, const TorsionQuadrature& quad,
                                                const M& material)
{
  const auto b = torsion_batch(twists, quad);
  const auto p = material.partials(b.invariants);
  const auto nq = quad.order();
  std::vector<double> out(twists.size(), 0.0);
  for (std::size_t k = 0; k < twists.size(); ++k)
    for (std::size_t q = 0; q < nq; ++q) {
      const auto col = static_cast<Eigen::Index>(k * nq + q);
      out[k] += b.coeff(col) * (p.d1(col) + p.d2(col));
    }
  return out;
}

/// sigma_ztheta(r) = 2 (phi/L) r (dPsi/dI1 + dPsi/dI2) at I1 = I2 = 3 + (r phi / L)^2.
template <EnergyPartials M>
double torsion_shear_stress(double radius, double twist, const TorsionGeometry& geom, const M& material)
{
  const auto inv = torsion_invariants(radius, twist, geom);
  Eigen::MatrixXd p(2, 1);
  p << inv.i1_bar, inv.i2_bar;
  const auto d = material.partials(p);
  return 2.0 * twist / geom.length * radius * (d.d1(0) + d.d2(0));
}

inline double torsion_shear_stress(double radius, double twist, const TorsionGeometry& geom, double c,
                                   const PicnnModel& model, const GateRealization& gates)
{
  return torsion_shear_stress(radius, twist, geom, PicnnMaterial(model, gates, c));
}

template <EnergyPartials M>
double torsion_torque_instantaneous(double twist, const TorsionGeometry& geom, const M& material,
                                    int order = kDefaultQuadratureOrder)
{
  if (!std::isfinite(twist))
    throw DomainError("twist must be finite");
  const TorsionQuadrature quad(geom, order);
  const double t[1] = {twist};
  return torsion_instantaneous_curve(std::span<const double>(t, 1), quad, material)[0];
}

inline double torsion_torque_instantaneous(double twist, const TorsionGeometry& geom, double c, const PicnnModel& model,
                                           const GateRealization& gates, int order = kDefaultQuadratureOrder)
{
  return torsion_torque_instantaneous(twist, geom, PicnnMaterial(model, gates, c), order);
}

// ---------------------------------------------------------------------------------------------------------------
// Protocol simulation

struct RelaxationSettings
{
  double relax_coeff = 0.0;
  double tau = kDefaultRelaxationTime;
  QlvForm form = QlvForm::convolution;
};

/// Instantaneous response along an explicit input history (stretch or twist in degrees), then QLV relaxation.
template <EnergyPartials M>
ResponseCurve simulate_history(LoadingMode mode, const TorsionGeometry& geometry, std::span<const double> times,
                               std::span<const double> inputs, const M& material, const RelaxationSettings& relax,
                               int quadrature_order = kDefaultQuadratureOrder)
{
  if (times.size() != inputs.size())
    throw DomainError("times and inputs differ in length");
  ResponseCurve curve;
  curve.times.assign(times.begin(), times.end());
  curve.inputs.assign(inputs.begin(), inputs.end());
  std::vector<double> inst;
  if (mode == LoadingMode::tension) {
    inst = tension_instantaneous_curve(curve.inputs, material);
  } else {
    std::vector<double> twists;
    for (double deg : curve.inputs)
      twists.push_back(degrees_to_radians(deg));
    inst = torsion_instantaneous_curve(twists, TorsionQuadrature(geometry, quadrature_order), material);
  }
  curve.outputs = qlv_relax(curve.times, inst, relax.relax_coeff, relax.tau, relax.form);
  for (std::size_t k = 0; k < curve.outputs.size(); ++k)
    curve.normalized_outputs.push_back(mode == LoadingMode::tension
                                           ? nominal_from_cauchy(curve.outputs[k], curve.inputs[k])
                                           : curve.outputs[k] * geometry.length / geometry.polar_moment());
  return curve;
}

/// Response on the given times with the protocol's input ramp.
template <EnergyPartials M>
ResponseCurve simulate_on_grid(const LoadingProtocol& protocol, std::span<const double> times, const M& material,
                               const RelaxationSettings& relax, int quadrature_order = kDefaultQuadratureOrder)
{
  protocol.validate();
  std::vector<double> inputs;
  for (double t : times)
    inputs.push_back(protocol.input_at(t));
  return simulate_history(protocol.mode, protocol.geometry, times, inputs, material, relax, quadrature_order);
}

template <EnergyPartials M>
ResponseCurve simulate(const LoadingProtocol& protocol, const M& material, const RelaxationSettings& relax,
                       int quadrature_order = kDefaultQuadratureOrder)
{
  const auto grid = protocol.time_grid();
  return simulate_on_grid(protocol, grid, material, relax, quadrature_order);
}

inline ResponseCurve simulate_tension(const LoadingProtocol& protocol, const PicnnModel& model, const QlvModel& qlv,
                                      const GateRealization& gates)
{
  if (protocol.mode != LoadingMode::tension)
    throw ConfigError("simulate_tension requires a tension protocol");
  return simulate(protocol, PicnnMaterial(model, gates, protocol.composition),
                  {qlv.relax_coeff(protocol.composition), qlv.tau, qlv.form});
}

inline ResponseCurve simulate_torsion(const LoadingProtocol& protocol, const PicnnModel& model, const QlvModel& qlv,
                                      const GateRealization& gates, int quadrature_order = kDefaultQuadratureOrder)
{
  if (protocol.mode != LoadingMode::torsion)
    throw ConfigError("simulate_torsion requires a torsion protocol");
  return simulate(protocol, PicnnMaterial(model, gates, protocol.composition),
                  {qlv.relax_coeff(protocol.composition), qlv.tau, qlv.form}, quadrature_order);
}

} // namespace picnn
