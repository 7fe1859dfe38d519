#pragma once

#include <picnn/errors.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace picnn {

struct MetricReport
{
  double r_squared = 0.0;
  double smape = 0.0; // percent
  std::size_t n_points = 0;
  std::size_t n_filtered_zero = 0;
};

namespace detail {

inline void check_same_length(std::span<const double> pred, std::span<const double> target)
{
  if (pred.size() != target.size())
    throw DomainError("prediction and target differ in length (" + std::to_string(pred.size()) + " vs " +
                      std::to_string(target.size()) + ")");
  if (target.empty())
    throw DomainError("metrics need at least one point");
}

} // namespace detail

/// 1 - sum (pred - y)^2 / sum (y - mean y)^2.
inline double r_squared(std::span<const double> pred, std::span<const double> target)
{
  detail::check_same_length(pred, target);
  double mean = 0.0;
  for (double y : target)
    mean += y;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (pred[i] - target[i]) * (pred[i] - target[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (!(ss_tot > 0.0))
    throw DomainError("R^2 is undefined for a constant target");
  return 1.0 - ss_res / ss_tot;
}

/// (100/N) sum |pred - y| / (|pred| + |y|) over points whose target is not exactly zero.
inline double smape(std::span<const double> pred, std::span<const double> target, std::size_t* filtered = nullptr)
{
  detail::check_same_length(pred, target);
  double s = 0.0;
  std::size_t n = 0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) {
      ++skipped;
      continue;
    }
    s += std::abs(pred[i] - target[i]) / (std::abs(pred[i]) + std::abs(target[i]));
    ++n;
  }
  if (filtered)
    *filtered = skipped;
  if (n == 0)
    throw DomainError("sMAPE has no points left after removing zero targets");
  return 100.0 * s / static_cast<double>(n);
}

inline MetricReport evaluate_metrics(std::span<const double> pred, std::span<const double> target)
{
  MetricReport r;
  r.r_squared = r_squared(pred, target);
  r.smape = smape(pred, target, &r.n_filtered_zero);
  r.n_points = target.size();
  return r;
}

} // namespace picnn
