#pragma once

/// \file expression.hpp
/// \brief Text rendering of the surviving terms of a gated network.

#include <picnn/potential_net.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace picnn {

namespace detail {

inline std::string coef(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Sum of coefficient * term, skipping zero coefficients; empty string when nothing survives.
inline std::string linear_sum(const std::vector<std::pair<double, std::string>>& terms)
{
  std::string out;
  for (const auto& [w, t] : terms) {
    if (w == 0.0)
      continue;
    if (out.empty())
      out = (w < 0 ? "-" : "") + coef(std::abs(w)) + "*" + t;
    else
      out += (w < 0 ? " - " : " + ") + coef(std::abs(w)) + "*" + t;
  }
  return out;
}

} // namespace detail

struct RenderedExpression
{
  std::vector<std::string> definitions; // one line per surviving hidden unit
  std::string energy;                   // psi in terms of the defined units
  std::string nested;                   // psi fully expanded, empty when too long
};

/// Surviving units under the inference gates, sp(u) = log(1 + exp(u)). A unit whose inputs are all pruned renders as sp(0).
inline RenderedExpression render_expression(const PicnnModel& model, std::size_t max_nested = 4000)
{
  const auto gates = inference_gates(model);
  const EnergyNetwork net(model, gates);
  const auto& lay = model.layout();
  const auto& arch = model.architecture();
  const auto depth = arch.depth();
  const bool sp_coupling = arch.coupling == CouplingTransform::softplus;
  RenderedExpression r;

  auto wrap = [](const std::string& inner) { return "sp(" + (inner.empty() ? std::string("0") : inner) + ")"; };

  std::vector<std::string> prev_names{"c"};
  std::vector<std::string> prev_nested{"c"};
  std::vector<std::vector<std::string>> cpl_names(depth), cpl_nested(depth);
  for (std::size_t h = 0; h < depth; ++h) {
    const Matrix& w = net.weight(lay.nc[h]);
    std::vector<std::string> names, nested;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      std::vector<std::pair<double, std::string>> t, tn;
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        t.emplace_back(w(i, j), prev_names[static_cast<std::size_t>(j)]);
        tn.emplace_back(w(i, j), prev_nested[static_cast<std::size_t>(j)]);
      }
      const auto name = "y" + std::to_string(h + 1) + "_" + std::to_string(i);
      names.push_back(name);
      nested.push_back(wrap(detail::linear_sum(tn)));
      r.definitions.push_back(name + " = " + wrap(detail::linear_sum(t)));
    }
    const Matrix& v = net.weight(lay.ncfc[h]);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      std::vector<std::pair<double, std::string>> t, tn;
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        t.emplace_back(v(i, j), names[static_cast<std::size_t>(j)]);
        tn.emplace_back(v(i, j), nested[static_cast<std::size_t>(j)]);
      }
      const auto name = "C" + std::to_string(h + 1) + "_" + std::to_string(i);
      const auto body = detail::linear_sum(t);
      const auto body_n = detail::linear_sum(tn);
      cpl_names[h].push_back(name);
      cpl_nested[h].push_back(sp_coupling ? wrap(body_n) : "(" + (body_n.empty() ? "0" : body_n) + ")");
      r.definitions.push_back(name + " = " + (sp_coupling ? wrap(body) : (body.empty() ? "0" : body)));
    }
    prev_names = std::move(names);
    prev_nested = std::move(nested);
  }

  std::vector<std::string> x_names, x_nested;
  for (std::size_t h = 0; h < depth; ++h) {
    const Matrix& win = net.weight(lay.input[h]);
    const Matrix& u = net.weight(lay.coupling[h]);
    const auto ci = h == 0 ? 0 : h - 1;
    std::vector<std::string> names, nested;
    for (Eigen::Index i = 0; i < win.rows(); ++i) {
      std::vector<std::pair<double, std::string>> t, tn;
      if (h > 0) {
        const Matrix& wz = net.weight(lay.hidden[h]);
        for (Eigen::Index j = 0; j < wz.cols(); ++j) {
          t.emplace_back(wz(i, j), x_names[static_cast<std::size_t>(j)]);
          tn.emplace_back(wz(i, j), x_nested[static_cast<std::size_t>(j)]);
        }
      }
      t.emplace_back(win(i, 0), "I1");
      t.emplace_back(win(i, 1), "I2");
      tn.emplace_back(win(i, 0), "I1");
      tn.emplace_back(win(i, 1), "I2");
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        t.emplace_back(u(i, j), cpl_names[ci][static_cast<std::size_t>(j)]);
        tn.emplace_back(u(i, j), cpl_nested[ci][static_cast<std::size_t>(j)]);
      }
      const auto name = "x" + std::to_string(h + 1) + "_" + std::to_string(i);
      names.push_back(name);
      nested.push_back(wrap(detail::linear_sum(tn)));
      r.definitions.push_back(name + " = " + wrap(detail::linear_sum(t)));
    }
    x_names = std::move(names);
    x_nested = std::move(nested);
  }

  const Matrix& wo = net.weight(lay.output);
  const int wh = arch.convex_widths.back();
  std::vector<std::pair<double, std::string>> t, tn;
  for (int j = 0; j < wh; ++j) {
    t.emplace_back(wo(0, j), x_names[static_cast<std::size_t>(j)]);
    tn.emplace_back(wo(0, j), x_nested[static_cast<std::size_t>(j)]);
  }
  for (int j = 0; j < arch.coupling_width; ++j) {
    t.emplace_back(wo(0, wh + j), cpl_names[depth - 1][static_cast<std::size_t>(j)]);
    tn.emplace_back(wo(0, wh + j), cpl_nested[depth - 1][static_cast<std::size_t>(j)]);
  }
  t.emplace_back(wo(0, wh + arch.coupling_width), "I1");
  t.emplace_back(wo(0, wh + arch.coupling_width + 1), "I2");
  tn.push_back(t[t.size() - 2]);
  tn.push_back(t.back());
  r.energy = detail::linear_sum(t);
  if (r.energy.empty())
    r.energy = "0";

  // keep only units reachable from psi through non-zero weights
  const auto& all = r.definitions;
  std::vector<char> used(all.size(), 0);
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i].compare(0, name.size() + 1, name + " ") == 0)
        return i;
    return all.size();
  };
  std::vector<std::size_t> stack;
  auto mark = [&](const std::string& name) {
    const auto i = index_of(name);
    if (i < all.size() && !used[i]) {
      used[i] = 1;
      stack.push_back(i);
    }
  };
  for (const auto& [w, name] : t)
    if (w != 0.0)
      mark(name);
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const auto& d = all[i];
    // operands are the identifiers following '*'
    for (std::size_t p = d.find('*'); p != std::string::npos; p = d.find('*', p + 1)) {
      const auto q = d.find_first_of(" )", p + 1);
      mark(d.substr(p + 1, q == std::string::npos ? std::string::npos : q - p - 1));
    }
  }
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (used[i])
      kept.push_back(all[i]);
  r.definitions = std::move(kept);

  auto nested = detail::linear_sum(tn);
  if (nested.size() <= max_nested)
    r.nested = nested.empty() ? "0" : nested;
  return r;
}

inline std::string format_expression(const RenderedExpression& e)
{
  std::ostringstream out;
  out << "sp(u) = log(1 + exp(u))\n";
  for (const auto& d : e.definitions)
    out << "  " << d << "\n";
  out << "psi = " << e.energy << "\n";
  if (!e.nested.empty())
    out << "\npsi = " << e.nested << "\n";
  return out.str();
}

} // namespace picnn
