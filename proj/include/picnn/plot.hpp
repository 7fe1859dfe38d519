#pragma once

/// \file plot.hpp
/// \brief Static SVG line plots: measured points with model curves.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace picnn {

struct PlotSeries
{
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false; // points instead of a line
  int color = 0;        // palette index
};

struct PlotSpec
{
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 720;
  int height = 480;
};

namespace detail {

inline const char* palette(int i)
{
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[((i % 10) + 10) % 10];
}

inline std::string escape_xml(const std::string& s)
{
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

/// Roughly five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi)
{
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
    t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return t;
}

} // namespace detail

inline std::string render_svg(const PlotSpec& spec)
{
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  if (x1 <= x0)
    x1 = x0 + 1.0;
  if (y1 <= y0)
    y1 = y0 + 1.0;
  const double pad_y = 0.05 * (y1 - y0);
  y0 -= pad_y;
  y1 += pad_y;

  const double left = 70, right = 170, top = 40, bottom = 55;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return top + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  char buf[256];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n",
                left, top, pw, ph);
  o << buf;
  for (double t : detail::ticks(x0, x1)) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%g</text>\n",
                  sx(t), top + ph, sx(t), top + ph + 5, sx(t), top + ph + 18, t);
    o << buf;
  }
  for (double t : detail::ticks(y0, y1)) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%g</text>\n",
                  left - 5, sy(t), left, sy(t), left - 8, sy(t) + 4, t);
    o << buf;
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << spec.height - 15 << "\" text-anchor=\"middle\">"
    << detail::escape_xml(spec.x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << top + ph / 2
    << ")\">" << detail::escape_xml(spec.y_label) << "</text>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::escape_xml(spec.title) << "</text>\n";

  int legend_row = 0;
  for (const auto& s : spec.series) {
    const char* col = detail::palette(s.color);
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"none\" stroke=\"%s\"/>\n",
                      sx(s.x[i]), sy(s.y[i]), col);
        o << buf;
      }
    } else if (!s.x.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(s.x[i]), sy(s.y[i]));
        o << buf;
      }
      o << "\"/>\n";
    }
    if (!s.label.empty()) {
      const double ly = top + 10 + 16 * legend_row++;
      const double lx = left + pw + 12;
      if (s.markers)
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"none\" stroke=\"%s\"/>", lx + 10,
                      ly - 4, col);
      else
        std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"1.5\"/>",
                      lx, ly - 4, lx + 20, ly - 4, col);
      o << buf << "<text x=\"" << lx + 26 << "\" y=\"" << ly << "\">" << detail::escape_xml(s.label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

} // namespace picnn
