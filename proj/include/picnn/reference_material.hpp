#pragma once

/**
 * \file reference_material.hpp
 * \brief Closed-form sparse reference energy and relaxation map, used as ground truth and data generator.
 *
 * psi(I1, I2, c) = 0.083089 I1
 *                + 4.01198 log[ (e^{-0.207897 I1 + 0.135303 I2} / (P + 1)^0.021823 + 1)^1.16891
 *                               ((P + 1)^0.049792 e^{0.228289 I1 - 0.204157 I2} + 1)^0.733048 e^{0.033506 I1} + 1 ]
 *                + 0.809351 log(e^{0.009634 I1} + 1),      P = prod_k (e^{a_k c} + 1)^{b_k}
 *
 * gamma(c) = 1 / (p1 p2 / q1 + 1) with p1, p2, q1 products of (1 + e^{+-w c})^e terms.
 *
 * Both are evaluated in log space: log P = sum_k b_k softplus(a_k c) reaches ~120 at c = 2.09, far beyond
 * what a direct product survives in single precision. Each expression is also an exact sparse instance
 * of the gated network (reference_picnn) and the gamma MLP (reference_gamma_mlp).
 */

#include <picnn/activations.hpp>
#include <picnn/experiment.hpp>
#include <picnn/loading.hpp>
#include <picnn/potential_net.hpp>
#include <picnn/viscoelastic.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace picnn {

namespace reference {

inline constexpr std::array<double, 4> kA{6.84602, 6.86996, 6.88268, 6.93876};
inline constexpr std::array<double, 4> kB{2.37126, 2.1961, 2.56167, 1.9888};

// energy literals in order of appearance
inline constexpr double kLinearI1 = 0.083089;
inline constexpr double kLogScale = 4.01198;
inline constexpr double kU1 = -0.207897, kU2 = 0.135303, kUc = -0.021823, kUexp = 1.16891;
inline constexpr double kV1 = 0.228289, kV2 = -0.204157, kVc = 0.049792, kVexp = 0.733048;
inline constexpr double kSkipI1 = 0.033506;
inline constexpr double kTailScale = 0.809351;
inline constexpr double kTailI1 = 0.009634;

// gamma literals: hidden rates and exponents of p1, p2 (numerator) and q1 (denominator)
inline constexpr std::array<double, 4> kP1Rate{1.381, 1.018, 0.976, 0.296};
inline constexpr std::array<double, 4> kP1Exp{0.423, 0.446, 0.552, 0.492};
inline constexpr std::array<double, 2> kP2Rate{0.059, 0.111};
inline constexpr std::array<double, 2> kP2Exp{0.054, 0.147};
inline constexpr std::array<double, 2> kQ1Rate{0.754, 1.295};
inline constexpr std::array<double, 2> kQ1Exp{0.254, 0.264};

/// log(P + 1) = softplus(sum_k b_k softplus(a_k c)).
inline double composition_feature(double c)
{
  double log_p = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    log_p += kB[k] * softplus(kA[k] * c);
  return softplus(log_p);
}

/// Sum of every literal; edits to the constants change it.
inline double coefficient_checksum()
{
  double s = kLinearI1 + kLogScale + kU1 + kU2 + kUc + kUexp + kV1 + kV2 + kVc + kVexp + kSkipI1 + kTailScale + kTailI1;
  for (std::size_t k = 0; k < 4; ++k)
    s += kA[k] + kB[k] + kP1Rate[k] + kP1Exp[k];
  for (std::size_t k = 0; k < 2; ++k)
    s += kP2Rate[k] + kP2Exp[k] + kQ1Rate[k] + kQ1Exp[k];
  return s;
}

} // namespace reference

/// Unnormalized reference energy psi_NN(I1, I2, c).
inline double psi_reference(double i1, double i2, double c)
{
  using namespace reference;
  const double feat = composition_feature(c);
  const double u = kU1 * i1 + kU2 * i2 + kUc * feat;
  const double v = kV1 * i1 + kV2 * i2 + kVc * feat;
  const double inner = kUexp * softplus(u) + kVexp * softplus(v) + kSkipI1 * i1;
  return kLinearI1 * i1 + kLogScale * softplus(inner) + kTailScale * softplus(kTailI1 * i1);
}

/// (dPsi/dI1, dPsi/dI2) of the reference energy.
inline std::pair<double, double> psi_reference_partials(double i1, double i2, double c)
{
  using namespace reference;
  const double feat = composition_feature(c);
  const double u = kU1 * i1 + kU2 * i2 + kUc * feat;
  const double v = kV1 * i1 + kV2 * i2 + kVc * feat;
  const double inner = kUexp * softplus(u) + kVexp * softplus(v) + kSkipI1 * i1;
  const double g = kLogScale * sigmoid(inner);
  const double su = kUexp * sigmoid(u);
  const double sv = kVexp * sigmoid(v);
  const double d1 = kLinearI1 + g * (su * kU1 + sv * kV1 + kSkipI1) + kTailScale * kTailI1 * sigmoid(kTailI1 * i1);
  const double d2 = g * (su * kU2 + sv * kV2);
  return {d1, d2};
}

/// Reference relaxation coefficient gamma(c) = 1 / (p1 p2 / q1 + 1).
inline double gamma_reference(double c)
{
  using namespace reference;
  if (!(c >= 0.0))
    throw DomainError("composition must be non-negative");
  double log_ratio = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    log_ratio += kP1Exp[k] * softplus(-kP1Rate[k] * c);
  for (std::size_t k = 0; k < 2; ++k)
    log_ratio += kP2Exp[k] * softplus(kP2Rate[k] * c) - kQ1Exp[k] * softplus(kQ1Rate[k] * c);
  return sigmoid(-log_ratio);
}

/// Energy partials of the reference expression at a bound composition.
class ReferenceMaterial
{
public:
  explicit ReferenceMaterial(double composition) : c_(composition) {}

  [[nodiscard]] InvariantPartials partials(const Eigen::MatrixXd& inv) const
  {
    InvariantPartials out{Eigen::RowVectorXd(inv.cols()), Eigen::RowVectorXd(inv.cols())};
    for (Eigen::Index n = 0; n < inv.cols(); ++n) {
      const auto [a, b] = psi_reference_partials(inv(0, n), inv(1, n), c_);
      out.d1(n) = a;
      out.d2(n) = b;
    }
    return out;
  }

private:
  double c_;
};

inline constexpr double kOpenLogAlpha = 10.0;
inline constexpr double kClosedLogAlpha = -10.0;

/**
 * Default-layout network whose surviving weights reproduce psi_reference exactly. Unused weights have
 * theta_bar = 0 and a closed gate; surviving weights have an open gate (inference gate = 1).
 */
inline PicnnModel reference_picnn(PicnnArchitecture arch = {})
{
  using namespace reference;
  arch.coupling = CouplingTransform::softplus;
  if (arch.depth() != 2 || arch.convex_widths[0] < 2 || arch.convex_widths[1] < 2 || arch.nc_widths[0] < 4 ||
      arch.coupling_width < 1)
    throw ConfigError("the reference energy needs two convex layers (>= 2 units), >= 4 first-layer nc units");
  PicnnModel model(arch);
  for (auto& m : model.matrices()) {
    m.theta_bar.setZero();
    m.log_alpha.setConstant(kClosedLogAlpha);
  }
  auto set = [](GatedMatrix& m, Eigen::Index r, Eigen::Index c, double v) {
    m.theta_bar(r, c) = v;
    m.log_alpha(r, c) = kOpenLogAlpha;
  };
  // y1_k = sp(a_k c); C_1[0] = sp(sum_k b_k y1_k) = log(P + 1)
  for (Eigen::Index k = 0; k < 4; ++k) {
    set(model.nc_map(0), k, 0, kA[k]);
    set(model.ncfc_map(0), 0, k, kB[k]);
  }
  // first convex layer: the two exponentials
  set(model.input_map(0), 0, 0, kU1);
  set(model.input_map(0), 0, 1, kU2);
  set(model.coupling_map(0), 0, 0, kUc);
  set(model.input_map(0), 1, 0, kV1);
  set(model.input_map(0), 1, 1, kV2);
  set(model.coupling_map(0), 1, 0, kVc);
  // second layer: unit 0 is the log term, unit 1 the tail softplus
  set(model.hidden_map(1), 0, 0, kUexp);
  set(model.hidden_map(1), 0, 1, kVexp);
  set(model.input_map(1), 0, 0, kSkipI1);
  set(model.input_map(1), 1, 0, kTailI1);
  // output over [x_H; C_H; I]
  const Eigen::Index wh = arch.convex_widths.back();
  auto& out = model.output_map();
  set(out, 0, 0, kLogScale);
  set(out, 0, 1, kTailScale);
  set(out, 0, wh + arch.coupling_width, kLinearI1);
  return model;
}

/// Gamma MLP with 8 hidden units reproducing gamma_reference exactly.
inline GammaMlp reference_gamma_mlp()
{
  using namespace reference;
  GammaMlp mlp;
  for (Eigen::Index k = 0; k < 4; ++k) {
    mlp.hidden(k) = -kP1Rate[k];
    mlp.output(k) = -kP1Exp[k];
  }
  for (Eigen::Index k = 0; k < 2; ++k) {
    mlp.hidden(4 + k) = kP2Rate[k];
    mlp.output(4 + k) = -kP2Exp[k];
    mlp.hidden(6 + k) = kQ1Rate[k];
    mlp.output(6 + k) = kQ1Exp[k];
  }
  return mlp;
}

inline QlvModel reference_qlv() { return {reference_gamma_mlp(), kDefaultRelaxationTime, QlvForm::convolution}; }

// ---------------------------------------------------------------------------------------------------------------
// Synthetic data

struct SynthesisSettings
{
  std::vector<std::string> compositions{"A", "DM-40", "DM-50", "DM-60", "DM-70"};
  std::vector<double> tension_rates{0.09, 0.009, 0.0009}; // 1/s
  std::vector<double> torsion_rates{360.0};               // deg/min
  double noise_std = 0.0; // relative to each curve's max - min
  std::uint64_t seed = 0;
  double max_stretch = 2.0;
  double max_twist_deg = 360.0;
  int tension_samples = 40;
  int torsion_samples = 20;
  int tension_substeps = 6;
  int torsion_substeps = 5;
  TorsionGeometry geometry{};
  int quadrature_order = kDefaultQuadratureOrder;
  QlvForm qlv_form = QlvForm::convolution;
};

inline std::string format_rate(double rate)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", rate);
  return buf;
}

/// Observation skeleton of a record: samples at uniform times with the ramp input, outputs zero.
inline ExperimentRecord make_record_skeleton(LoadingMode mode, const std::string& name, double c, double rate,
                                             int n_samples, int substeps, double max_input,
                                             const TorsionGeometry& geom)
{
  if (n_samples < 2)
    throw ConfigError("a record needs at least two samples");
  ExperimentRecord rec;
  rec.mode = mode;
  rec.composition_name = name;
  rec.c = c;
  rec.rate = rate;
  rec.geometry = geom;
  rec.role = default_role(name);
  rec.substeps = substeps;
  rec.id = name + "_" + to_string(mode) + "_" + format_rate(rate);
  LoadingProtocol proto;
  proto.mode = mode;
  proto.rate = rate;
  proto.composition = c;
  proto.geometry = geom;
  const double duration = mode == LoadingMode::tension ? (max_input - 1.0) / rate : max_input / (rate / 60.0);
  for (int k = 0; k < n_samples; ++k) {
    const double t = duration * k / (n_samples - 1);
    rec.samples.push_back({t, proto.input_at(t), 0.0});
  }
  return rec;
}

/// Model response at the record's observation times, integrated on its refined grid.
template <EnergyPartials M>
std::vector<double> predict_record(const ExperimentRecord& rec, const M& material, const RelaxationSettings& relax,
                                   int quadrature_order = kDefaultQuadratureOrder)
{
  const auto grid = refine_grid(rec);
  const auto curve = simulate_history(rec.mode, rec.geometry, grid.times, grid.inputs, material, relax, quadrature_order);
  std::vector<double> out;
  for (auto idx : grid.observed)
    out.push_back(curve.outputs[idx]);
  return out;
}

/// Reference-material records for every (composition, rate) pair; deterministic under settings.seed.
inline std::vector<ExperimentRecord> synthesize_dataset(const SynthesisSettings& s)
{
  if (!(s.noise_std >= 0.0))
    throw DomainError("noise standard deviation must be non-negative");
  std::vector<ExperimentRecord> out;
  std::uint64_t index = 0;
  auto emit = [&](ExperimentRecord rec) {
    const ReferenceMaterial mat(rec.c);
    const auto y = predict_record(rec, mat, {gamma_reference(rec.c), kDefaultRelaxationTime, s.qlv_form},
                                  s.quadrature_order);
    for (std::size_t k = 0; k < y.size(); ++k)
      rec.samples[k].output = y[k];
    if (s.noise_std > 0.0) {
      const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
      std::mt19937_64 rng(s.seed * 0x9E3779B97F4A7C15ULL + index);
      std::normal_distribution<double> noise(0.0, s.noise_std * (*hi - *lo));
      for (std::size_t k = 1; k < y.size(); ++k)
        rec.samples[k].output += noise(rng);
    }
    ++index;
    out.push_back(std::move(rec));
  };
  for (const auto& name : s.compositions) {
    const auto c = composition_value(name);
    if (!c)
      throw ConfigError("unknown composition '" + name + "'");
    for (double rate : s.tension_rates)
      emit(make_record_skeleton(LoadingMode::tension, name, *c, rate, s.tension_samples, s.tension_substeps,
                                s.max_stretch, s.geometry));
  }
  for (const auto& name : s.compositions) {
    const auto c = composition_value(name);
    for (double rate : s.torsion_rates)
      emit(make_record_skeleton(LoadingMode::torsion, name, *c, rate, s.torsion_samples, s.torsion_substeps,
                                s.max_twist_deg, s.geometry));
  }
  return out;
}

} // namespace picnn
