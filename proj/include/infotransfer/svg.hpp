// Minimal self-contained SVG charts for profile curves and bifurcation scatter.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace infotransfer::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Marker {
  double x;
  double y;
  bool filled;
};

namespace detail {

inline constexpr double kWidth = 720;
inline constexpr double kHeight = 420;
inline constexpr double kMargin = 56;
inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                           "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const {
    return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin);
  }
};

inline Frame pad(double x0, double x1, double y0, double y1) {
  if (!(y1 > y0)) {
    y0 -= 1;
    y1 += 1;
  }
  const double dy = 0.05 * (y1 - y0);
  if (!(x1 > x0)) x1 = x0 + 1;
  return {x0, x1, y0 - dy, y1 + dy};
}

inline void axes(std::ostringstream& out, const Frame& f, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
      << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(kHeight - kMargin + 16)
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    out << "<text x=\"" << num(kMargin - 6) << "\" y=\"" << num(f.py(yv) + 4)
        << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

}  // namespace detail

/// One polyline per series over a shared frame.
inline std::string line_chart(const std::vector<Series>& series, const std::string& title,
                              const std::string& xlabel, const std::string& ylabel) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const auto f = detail::pad(x0, x1, y0, y1);
  std::ostringstream out;
  detail::axes(out, f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* colour = detail::kPalette[k % std::size(detail::kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    const auto& s = series[k];
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      out << detail::num(f.px(s.x[i])) << ',' << detail::num(f.py(s.y[i])) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << detail::kWidth - detail::kMargin - 4 << "\" y=\""
        << detail::kMargin + 16 + 16 * static_cast<double>(k) << "\" text-anchor=\"end\" fill=\""
        << colour << "\">" << detail::escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// Filled markers for stable points, hollow for unstable.
inline std::string scatter_chart(const std::vector<Marker>& markers, const std::string& title,
                                 const std::string& xlabel, const std::string& ylabel) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& m : markers) {
    x0 = std::min(x0, m.x);
    x1 = std::max(x1, m.x);
    y0 = std::min(y0, m.y);
    y1 = std::max(y1, m.y);
  }
  if (markers.empty()) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const auto f = detail::pad(x0, x1, y0, y1);
  std::ostringstream out;
  detail::axes(out, f, title, xlabel, ylabel);
  out << "<g stroke-width=\"0.8\">\n";
  for (const auto& m : markers) {
    out << "<circle cx=\"" << detail::num(f.px(m.x)) << "\" cy=\"" << detail::num(f.py(m.y))
        << "\" r=\"1.6\" " << (m.filled ? "fill=\"#1f77b4\"" : "fill=\"none\" stroke=\"#d62728\"")
        << "/>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace infotransfer::svg
