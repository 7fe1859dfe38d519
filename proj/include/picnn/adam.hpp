#pragma once

#include <picnn/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace picnn {

struct AdamState
{
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  AdamState() = default;
  AdamState(Eigen::Index n, double lr) : learning_rate(lr), m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update in place. Throws NumericalError on a non-finite gradient, leaving params untouched.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& s)
{
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw ConfigError("Adam: parameter, gradient and moment sizes differ");
  if (!grads.allFinite())
    throw NumericalError("Adam: non-finite gradient");
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (Eigen::Index i = 0; i < params.size(); ++i)
    params(i) -= s.learning_rate * (s.m(i) / c1) / (std::sqrt(s.v(i) / c2) + s.epsilon);
}

} // namespace picnn
