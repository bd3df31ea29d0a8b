#pragma once
// Minimal deterministic SVG line plots (fixed 800x600 viewport). Coordinates
// are printed with a fixed number of decimals so identical inputs give
// byte-identical files.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "hjadj/errors.hpp"

namespace hjadj::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Scales {
  bool log_x = true;
  bool log_y = true;
};

struct Labels {
  std::string title;
  std::string x;
  std::string y;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    case '-':
      // "--" may not appear inside XML comments; harmless elsewhere.
      out += (!out.empty() && out.back() == '-') ? "&#45;" : "-";
      break;
    default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;

  double map(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (map(v) - lo) / (hi - lo); }

  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::ceil(lo - 1e-9); e <= hi + 1e-9; e += 1.0) t.push_back(std::pow(10.0, e));
      if (t.size() < 2) t = {std::pow(10.0, lo), std::pow(10.0, hi)};
    } else {
      for (int k = 0; k <= 5; ++k) t.push_back(lo + (hi - lo) * k / 5.0);
    }
    return t;
  }
};

inline Axis make_axis(bool log, const std::vector<const std::vector<double> *> &data) {
  Axis a{log, INFINITY, -INFINITY};
  for (const auto *v : data) {
    for (double x : *v) {
      hjadj::detail::require(std::isfinite(x), "plot data must be finite");
      hjadj::detail::require(!log || x > 0.0, "log axes need positive data");
      a.lo = std::min(a.lo, a.map(x));
      a.hi = std::max(a.hi, a.map(x));
    }
  }
  if (a.hi - a.lo < 1e-12) {
    const double pad = log ? 0.5 : std::max(1.0, std::abs(a.lo)) * 0.5;
    a.lo -= pad;
    a.hi += pad;
  } else {
    const double pad = 0.05 * (a.hi - a.lo);
    a.lo -= pad;
    a.hi += pad;
  }
  return a;
}

} // namespace detail

/// Writes an SVG line plot; `source` (e.g. the CSV the data came from) is
/// recorded in a leading comment.
inline void emit_svg(std::ostream &os, const std::vector<Series> &series, const Labels &labels,
                     const Scales &scales, const std::string &source = "") {
  hjadj::detail::require(!series.empty(), "nothing to plot");
  std::vector<const std::vector<double> *> xs, ys;
  for (const auto &s : series) {
    hjadj::detail::require(!s.x.empty() && s.x.size() == s.y.size(), "series must be nonempty and paired");
    xs.push_back(&s.x);
    ys.push_back(&s.y);
  }
  const detail::Axis ax = detail::make_axis(scales.log_x, xs);
  const detail::Axis ay = detail::make_axis(scales.log_y, ys);

  constexpr double W = 800, H = 600, L = 90, R = 30, T = 50, B = 70;
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double v) { return L + ax.frac(v) * pw; };
  auto py = [&](double v) { return T + (1.0 - ay.frac(v)) * ph; };
  static const std::array<const char *, 6> palette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!source.empty()) os << "<!-- source: " << detail::escape(source) << " -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  os << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  os << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">"
     << detail::escape(labels.title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ax.ticks()) {
    const std::string x = detail::num(px(t));
    os << "<line x1=\"" << x << "\" y1=\"" << T + ph << "\" x2=\"" << x << "\" y2=\"" << T
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << T + ph + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::tick(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const std::string y = detail::num(py(t));
    os << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << L + pw << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << y
       << "\" text-anchor=\"end\" dominant-baseline=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << detail::tick(t) << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 20
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << detail::escape(labels.x)
     << "</text>\n";
  os << "<text x=\"20\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"14\" transform=\"rotate(-90 20 " << T + ph / 2 << ")\">" << detail::escape(labels.y)
     << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto &s = series[k];
    const char *color = palette[k % palette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << (i ? " " : "") << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i]));
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << detail::num(px(s.x[i])) << "\" cy=\"" << detail::num(py(s.y[i]))
         << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    const double ly = T + 20 + 20 * static_cast<double>(k);
    os << "<line x1=\"" << L + 15 << "\" y1=\"" << ly << "\" x2=\"" << L + 45 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << L + 52 << "\" y=\"" << ly
       << "\" dominant-baseline=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
}

} // namespace hjadj::svg
