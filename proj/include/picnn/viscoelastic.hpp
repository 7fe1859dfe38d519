#pragma once

/**
 * \file viscoelastic.hpp
 * \brief Quasi-linear viscoelastic relaxation with a single exponential kernel.
 *
 * sigma(t) = sigma_e(t) - (gamma_r / tau) int_0^t exp(-(t - s) / tau) sigma_e(s) ds
 *
 * The history integral is advanced recursively, O(1) per step. Within each interval sigma_e is taken as the
 * linear interpolant of its end values and integrated against the kernel exactly, so step and ramp inputs
 * are reproduced to round-off and smooth inputs converge at second order. The relaxation coefficient
 * gamma_r is produced from the composition by a small bias-free MLP with a sigmoid output.
 */

#include <picnn/activations.hpp>
#include <picnn/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace picnn {

enum class QlvForm { convolution, multiplier };

inline const char* to_string(QlvForm f) { return f == QlvForm::convolution ? "convolution" : "multiplier"; }

inline constexpr double kDefaultRelaxationTime = 10.0; // s

struct QlvKernel
{
  double relax_coeff = 0.0;
  double tau = kDefaultRelaxationTime;

  void validate() const
  {
    if (!(relax_coeff >= 0.0 && relax_coeff <= 1.0))
      throw DomainError("relaxation coefficient must lie in [0, 1]");
    if (!(tau > 0.0))
      throw DomainError("relaxation time must be positive");
  }
};

struct StressHistory
{
  std::vector<double> times;
  std::vector<double> values;
};

namespace detail {

inline void check_history(std::span<const double> times, std::span<const double> values)
{
  if (times.size() != values.size())
    throw DomainError("history times and values differ in length");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw DomainError("history times must be strictly increasing (index " + std::to_string(k) + ")");
}

// Kernel weights of the left and right end values over one interval of length dt.
struct IntervalWeights
{
  double decay, left, right;
};

inline IntervalWeights interval_weights(double dt, double tau)
{
  const double u = dt / tau;
  const double decay = std::exp(-u);
  const double m = -std::expm1(-u) / u; // (1 - e^-u) / u, accurate for small u
  return {decay, m - decay, 1.0 - m};
}

} // namespace detail

/**
 * Normalized history integral h(t_k) = (1/tau) int_0^{t_k} exp(-(t_k - s)/tau) sigma_e(s) ds, with sigma_e
 * piecewise linear between samples. The relaxed stress is then sigma_e - gamma_r h.
 */
inline std::vector<double> qlv_history_integral(std::span<const double> times, std::span<const double> values, double tau)
{
  detail::check_history(times, values);
  std::vector<double> h(times.size(), 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const auto w = detail::interval_weights(times[k] - times[k - 1], tau);
    h[k] = w.decay * h[k - 1] + w.left * values[k - 1] + w.right * values[k];
  }
  return h;
}

/// Transpose of qlv_history_integral: given dL/dh, returns dL/dsigma_e.
inline std::vector<double> qlv_history_integral_adjoint(std::span<const double> times, std::span<const double> h_bar,
                                                        double tau)
{
  const std::size_t n = times.size();
  std::vector<double> v_bar(n, 0.0);
  double carry = 0.0; // adjoint of h[k] including downstream contributions
  for (std::size_t k = n; k-- > 1;) {
    carry += h_bar[k];
    const auto w = detail::interval_weights(times[k] - times[k - 1], tau);
    v_bar[k] += carry * w.right;
    v_bar[k - 1] += carry * w.left;
    carry *= w.decay;
  }
  return v_bar;
}

/// Relaxed history for the convolution form (default) or the pointwise multiplier reading.
inline std::vector<double> qlv_relax(std::span<const double> times, std::span<const double> values, double relax_coeff,
                                     double tau = kDefaultRelaxationTime, QlvForm form = QlvForm::convolution)
{
  QlvKernel{relax_coeff, tau}.validate();
  detail::check_history(times, values);
  std::vector<double> out(values.begin(), values.end());
  if (form == QlvForm::multiplier) {
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] *= 1.0 - relax_coeff * (1.0 - std::exp(-(times[k] - times.front()) / tau));
    return out;
  }
  const auto h = qlv_history_integral(times, values, tau);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] -= relax_coeff * h[k];
  return out;
}

inline StressHistory qlv_convolve(const StressHistory& instantaneous, const QlvKernel& kernel,
                                  QlvForm form = QlvForm::convolution)
{
  return {instantaneous.times, qlv_relax(instantaneous.times, instantaneous.values, kernel.relax_coeff, kernel.tau, form)};
}

/// gamma(c) = sigmoid(W_out softplus(W_hidden c)), no biases.
struct GammaMlp
{
  Eigen::VectorXd hidden = Eigen::VectorXd::Zero(8);
  Eigen::RowVectorXd output = Eigen::RowVectorXd::Zero(8);

  [[nodiscard]] Eigen::Index parameter_count() const { return hidden.size() + output.size(); }

  [[nodiscard]] Eigen::VectorXd parameters() const
  {
    Eigen::VectorXd p(parameter_count());
    p << hidden, output.transpose();
    return p;
  }

  void set_parameters(const Eigen::VectorXd& p)
  {
    if (p.size() != parameter_count())
      throw ConfigError("gamma MLP parameter vector has the wrong length");
    hidden = p.head(hidden.size());
    output = p.tail(output.size()).transpose();
  }

  template <class Rng>
  void initialize(Rng& rng)
  {
    std::uniform_real_distribution<double> sym(-0.1, 0.1);
    for (auto& v : hidden)
      v = sym(rng);
    for (auto& v : output)
      v = sym(rng);
  }
};

inline double gamma_of_composition(double c, const GammaMlp& mlp)
{
  if (!(c >= 0.0))
    throw DomainError("composition must be non-negative");
  const Eigen::VectorXd a = (mlp.hidden * c).unaryExpr([](double v) { return softplus(v); });
  return sigmoid(mlp.output.dot(a));
}

/// d gamma / d(parameters) in GammaMlp::parameters() order.
inline Eigen::VectorXd gamma_gradient(double c, const GammaMlp& mlp)
{
  const Eigen::VectorXd pre = mlp.hidden * c;
  const Eigen::VectorXd a = pre.unaryExpr([](double v) { return softplus(v); });
  const double g = sigmoid(mlp.output.dot(a));
  const double dg = g * (1.0 - g);
  Eigen::VectorXd out(mlp.parameter_count());
  const auto n = mlp.hidden.size();
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = dg * mlp.output(i) * sigmoid(pre(i)) * c;
  out.tail(mlp.output.size()) = dg * a;
  return out;
}

/// Relaxation part of the viscoelastic model: gamma MLP plus the fixed kernel settings.
struct QlvModel
{
  GammaMlp mlp;
  double tau = kDefaultRelaxationTime;
  QlvForm form = QlvForm::convolution;

  [[nodiscard]] double relax_coeff(double c) const { return gamma_of_composition(c, mlp); }
};

} // namespace picnn
