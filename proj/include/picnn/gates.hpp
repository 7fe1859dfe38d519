#pragma once

/**
 * \file gates.hpp
 * \brief Hard-concrete gates for smoothed L0 sparsification.
 *
 * Every trainable weight is stored as theta = theta_bar * z where z in [0, 1] is a gate driven by a
 * location parameter log_alpha. During training z is sampled from the stretched and clamped binary
 * concrete distribution; at inference the deterministic gate zhat is used and weights with zhat = 0
 * are pruned.
 */

#include <picnn/activations.hpp>
#include <picnn/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace picnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct L0Hyper
{
  double gamma_gate = -0.1;
  double zeta = 1.1;
  double beta = 2.0 / 3.0;
  double log_alpha_init_std = 0.01;
  int mc_samples = 1;

  void validate() const
  {
    if (!(gamma_gate < 0.0 && 0.0 < zeta))
      throw ConfigError("L0 gates require gamma < 0 < zeta");
    if (!(beta > 0.0 && beta <= 1.0))
      throw ConfigError("L0 gate temperature beta must lie in (0, 1]");
    if (mc_samples < 1)
      throw ConfigError("at least one Monte Carlo gate sample is required");
  }

  /// Offset beta * log(-gamma / zeta) inside the expected-L0 sigmoid.
  [[nodiscard]] double penalty_shift() const { return beta * std::log(-gamma_gate / zeta); }
};

enum class Constraint { unconstrained, nonnegative };

enum class ParamGroup { fc, nc, ncfc };

inline const char* to_string(Constraint c) { return c == Constraint::nonnegative ? "nonnegative" : "unconstrained"; }

inline const char* to_string(ParamGroup g)
{
  switch (g) {
    case ParamGroup::fc: return "fc";
    case ParamGroup::nc: return "nc";
    case ParamGroup::ncfc: return "ncfc";
  }
  return "?";
}

struct GatedMatrix
{
  std::string name;
  ParamGroup group = ParamGroup::fc;
  Constraint constraint = Constraint::unconstrained;
  Matrix theta_bar;
  Matrix log_alpha;

  [[nodiscard]] Eigen::Index size() const { return theta_bar.size(); }
};

/// Gate values and their sensitivity dz/dlog_alpha for one matrix.
struct Gate
{
  Matrix z;
  Matrix dz_dlog_alpha;
};

/// Stretched, clamped gate value s_bar -> min(1, max(0, s_bar)) and its derivative w.r.t. log_alpha.
struct GateValue
{
  double z;
  double dz_dlog_alpha;
};

/// Sampled gate for uniform noise u in (0,1).
inline GateValue sample_gate(double log_alpha, double u, const L0Hyper& hyper)
{
  if (!(u > 0.0 && u < 1.0))
    throw DomainError("gate noise must lie strictly inside (0, 1)");
  const double s = sigmoid((std::log(u) - std::log1p(-u) + log_alpha) / hyper.beta);
  const double span = hyper.zeta - hyper.gamma_gate;
  const double s_bar = s * span + hyper.gamma_gate;
  if (s_bar <= 0.0)
    return {0.0, 0.0};
  if (s_bar >= 1.0)
    return {1.0, 0.0};
  return {s_bar, span * s * (1.0 - s) / hyper.beta};
}

/// Deterministic test-time gate zhat = min(1, max(0, sig(log_alpha)(zeta - gamma) + gamma)).
inline GateValue inference_gate(double log_alpha, const L0Hyper& hyper)
{
  const double s = sigmoid(log_alpha);
  const double span = hyper.zeta - hyper.gamma_gate;
  const double s_bar = s * span + hyper.gamma_gate;
  if (s_bar <= 0.0)
    return {0.0, 0.0};
  if (s_bar >= 1.0)
    return {1.0, 0.0};
  return {s_bar, span * s * (1.0 - s)};
}

/// Probability that a gate is non-zero, sig(log_alpha - beta log(-gamma/zeta)).
inline double expected_gate_activity(double log_alpha, const L0Hyper& hyper)
{
  return sigmoid(log_alpha - hyper.penalty_shift());
}

} // namespace picnn
