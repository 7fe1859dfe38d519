#include "test_support.hpp"

#include <picnn/loading.hpp>
#include <picnn/reference_material.hpp>

#include <gtest/gtest.h>

using namespace picnn;

namespace {

const TorsionGeometry kRod{57.0, 5.0};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST(Tension, ZeroStressAtUnitStretch)
{
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = fixtures::random_model(rng);
    const auto g = inference_gates(m);
    for (double c : {0.0, 0.4669, 2.0895})
      EXPECT_LE(std::abs(tension_stress_instantaneous(1.0, c, m, g)), 1e-12);
  }
}

TEST(Tension, NeoHookean)
{
  EXPECT_NEAR(tension_stress_instantaneous(2.0, neo_hookean(1.0)), 3.5, 1e-13);
}

TEST(Tension, MooneyRivlin)
{
  const double c1 = 0.3, c2 = 0.12;
  for (double l : {0.7, 1.0, 1.4, 2.0}) {
    const double expect = 2.0 * (l * l - 1.0 / l) * (c1 + c2 / l);
    EXPECT_NEAR(tension_stress_instantaneous(l, mooney_rivlin(c1, c2)), expect, 1e-13);
  }
}

TEST(Tension, ZeroGammaCurveIsInstantaneous)
{
  std::mt19937_64 rng(2);
  const auto m = fixtures::random_model(rng);
  const auto g = inference_gates(m);
  LoadingProtocol p;
  p.rate = 0.09;
  p.duration = 11.0;
  p.time_step = 0.1;
  p.composition = 0.4669;
  const auto curve = simulate(p, PicnnMaterial(m, g, p.composition), {0.0});
  for (std::size_t k = 0; k < curve.times.size(); ++k)
    EXPECT_DOUBLE_EQ(curve.outputs[k], tension_stress_instantaneous(curve.inputs[k], p.composition, m, g));
  EXPECT_EQ(curve.outputs.front(), 0.0);
}

TEST(Tension, RateIndependentWithoutRelaxation)
{
  const ReferenceMaterial mat(0.4669);
  LoadingProtocol fast, slow;
  fast.rate = 0.09;
  fast.duration = 10.0;
  fast.time_step = 0.5;
  slow.rate = 0.009;
  slow.duration = 100.0;
  slow.time_step = 5.0;
  const auto a = simulate(fast, mat, {0.0});
  const auto b = simulate(slow, mat, {0.0});
  ASSERT_EQ(a.outputs.size(), b.outputs.size());
  for (std::size_t k = 0; k < a.outputs.size(); ++k) {
    EXPECT_NEAR(a.inputs[k], b.inputs[k], 1e-12);
    EXPECT_NEAR(a.outputs[k], b.outputs[k], 1e-12);
  }
}

TEST(Tension, ReferenceModelThroughBothPaths)
{
  const auto model = reference_picnn();
  const auto gates = inference_gates(model);
  const auto qlv = reference_qlv();
  LoadingProtocol p;
  p.rate = 0.09;
  p.duration = 11.0;
  p.time_step = 0.05;
  p.composition = 0.0;
  const auto a = simulate_tension(p, model, qlv, gates);
  const auto b = simulate(p, ReferenceMaterial(0.0), {gamma_reference(0.0)});
  for (std::size_t k = 1; k < a.outputs.size(); ++k)
    EXPECT_LT(rel(a.outputs[k], b.outputs[k]), 1e-8);
}

TEST(Tension, SlowerRateRelaxesMore)
{
  for (double c : {0.0, 0.1755, 0.4669, 1.0, 2.0895}) {
    const ReferenceMaterial mat(c);
    double prev = std::numeric_limits<double>::infinity();
    for (double rate : {0.09, 0.009, 0.0009}) {
      LoadingProtocol p;
      p.rate = rate;
      p.duration = 1.0 / rate;
      p.time_step = p.duration / 600.0;
      const auto curve = simulate(p, mat, {gamma_reference(c)});
      EXPECT_LE(curve.outputs.back(), prev);
      prev = curve.outputs.back();
    }
  }
}

TEST(Torsion, ShearStressExamples)
{
  const auto nh = neo_hookean(1.0);
  EXPECT_EQ(torsion_shear_stress(3.0, 0.0, kRod, nh), 0.0);
  EXPECT_EQ(torsion_shear_stress(0.0, 2.0, kRod, nh), 0.0);
  for (double r : {0.5, 2.0, 5.0})
    EXPECT_NEAR(torsion_shear_stress(r, 2.0, kRod, nh), 2.0 / 57.0 * r, 1e-15);
}

TEST(Torsion, NeoHookeanTorqueAnalytic)
{
  const auto nh = neo_hookean(1.0);
  for (double deg : {90.0, 180.0, 360.0, 720.0}) {
    const double phi = degrees_to_radians(deg);
    const double t = torsion_torque_instantaneous(phi, kRod, nh);
    EXPECT_LT(rel(t, phi / 57.0 * kRod.polar_moment()), 1e-12);
    EXPECT_LT(rel(t * 57.0 / kRod.polar_moment(), phi), 1e-12);
  }
  EXPECT_EQ(torsion_torque_instantaneous(0.0, kRod, nh), 0.0);
}

TEST(Torsion, TorqueIsOdd)
{
  std::mt19937_64 rng(3);
  const auto m = fixtures::random_model(rng);
  const auto g = inference_gates(m);
  for (double phi : {0.3, 1.7, 6.0}) {
    const double a = torsion_torque_instantaneous(phi, kRod, 0.5, m, g);
    const double b = torsion_torque_instantaneous(-phi, kRod, 0.5, m, g);
    EXPECT_NEAR(a, -b, 1e-10 * std::abs(a));
  }
}

TEST(Torsion, QuadratureSelfConvergence)
{
  const ReferenceMaterial mat(1.0);
  const double phi = degrees_to_radians(360.0);
  EXPECT_LT(rel(torsion_torque_instantaneous(phi, kRod, mat, 16), torsion_torque_instantaneous(phi, kRod, mat, 32)), 1e-8);
  for (double deg = 30.0; deg <= 720.0; deg += 30.0) {
    const double p = degrees_to_radians(deg);
    EXPECT_LT(rel(torsion_torque_instantaneous(p, kRod, mat, 8), torsion_torque_instantaneous(p, kRod, mat, 16)), 1e-6);
  }
}

TEST(Torsion, QuadratureAgreesWithFineTrapezoid)
{
  const double c = 0.4669;
  const ReferenceMaterial mat(c);
  const double phi = degrees_to_radians(360.0);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = kRod.radius * i / n;
    const double f = r * r * torsion_shear_stress(r, phi, kRod, mat);
    sum += (i == 0 || i == n ? 0.5 : 1.0) * f;
  }
  const double trap = 2.0 * M_PI * sum * kRod.radius / n;
  EXPECT_LT(rel(torsion_torque_instantaneous(phi, kRod, mat), trap), 1e-7);
}

TEST(Torsion, NeoHookeanNormalizedCurve)
{
  LoadingProtocol p;
  p.mode = LoadingMode::torsion;
  p.rate = 180.0;
  p.duration = 120.0;
  p.time_step = 1.0;
  const auto curve = simulate(p, neo_hookean(1.0), {0.0});
  for (std::size_t k = 0; k < curve.times.size(); ++k)
    EXPECT_NEAR(curve.normalized_outputs[k], degrees_to_radians(curve.inputs[k]), 1e-12 * (1.0 + curve.inputs[k]));
}

TEST(Torsion, SmallAngleSlopeIsShearModulus)
{
  const double c = 0.4669;
  const auto [d1, d2] = psi_reference_partials(3.0, 3.0, c);
  LoadingProtocol p;
  p.mode = LoadingMode::torsion;
  p.rate = 360.0;
  p.duration = 1e-3;
  p.time_step = 1e-3;
  const auto curve = simulate(p, ReferenceMaterial(c), {0.0});
  const double slope = curve.normalized_outputs.back() / degrees_to_radians(curve.inputs.back());
  EXPECT_LT(rel(slope, 2.0 * (d1 + d2)), 1e-6);
}

TEST(Torsion, ReferenceModelThroughBothPaths)
{
  const auto model = reference_picnn();
  const auto gates = inference_gates(model);
  const auto qlv = reference_qlv();
  LoadingProtocol p;
  p.mode = LoadingMode::torsion;
  p.rate = 360.0;
  p.duration = 60.0;
  p.time_step = 0.5;
  p.composition = 1.0;
  const auto a = simulate_torsion(p, model, qlv, gates);
  const auto b = simulate(p, ReferenceMaterial(1.0), {gamma_reference(1.0)});
  for (std::size_t k = 1; k < a.outputs.size(); ++k)
    EXPECT_LT(rel(a.outputs[k], b.outputs[k]), 1e-8);
}

TEST(Torsion, PointwiseRelaxationCommutesWithIntegration)
{
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = fixtures::random_model(rng);
    const auto g = inference_gates(m);
    const PicnnMaterial mat(m, g, 0.3 * trial);
    std::vector<double> times, twists;
    for (int k = 0; k <= 200; ++k) {
      times.push_back(0.3 * k);
      twists.push_back(degrees_to_radians(6.0 * 0.3 * k));
    }
    const TorsionQuadrature quad(kRod, 16);
    const auto torque = torsion_instantaneous_curve(twists, quad, mat);
    const auto integrated_first = qlv_relax(times, torque, 0.35);
    std::vector<double> pointwise_first(times.size(), 0.0);
    for (std::size_t q = 0; q < quad.order(); ++q) {
      std::vector<double> tau_q;
      for (double phi : twists)
        tau_q.push_back(torsion_shear_stress(quad.radii[q], phi, kRod, mat));
      const auto relaxed = qlv_relax(times, tau_q, 0.35);
      const double w = quad.factors[q] * kRod.length / (2.0 * quad.radii[q]); // 2 pi w_q r_q^2
      for (std::size_t k = 0; k < times.size(); ++k)
        pointwise_first[k] += w * relaxed[k];
    }
    for (std::size_t k = 1; k < times.size(); ++k)
      EXPECT_LT(rel(pointwise_first[k], integrated_first[k]), 1e-9);
  }
}

TEST(Protocol, Validation)
{
  LoadingProtocol p;
  p.rate = -1.0;
  EXPECT_THROW(p.validate(), DomainError);
  p.rate = 1.0;
  p.mode = LoadingMode::torsion;
  p.geometry.radius = 0.0;
  EXPECT_THROW(p.validate(), DomainError);
}

TEST(Protocol, InputRamps)
{
  LoadingProtocol t;
  t.rate = 0.09;
  EXPECT_DOUBLE_EQ(t.input_at(10.0), 1.9);
  LoadingProtocol r;
  r.mode = LoadingMode::torsion;
  r.rate = 360.0;
  EXPECT_DOUBLE_EQ(r.input_at(60.0), 360.0);
}

TEST(Quadrature, IntegratesPolynomialsExactly)
{
  const GaussLegendre rule(16, 0.0, 5.0);
  EXPECT_NEAR(rule.integrate([](double x) { return std::pow(x, 31); }), std::pow(5.0, 32) / 32.0, 1e-12 * std::pow(5.0, 32) / 32.0);
  double wsum = 0.0;
  for (double w : rule.weights)
    wsum += w;
  EXPECT_NEAR(wsum, 5.0, 1e-14);
}
