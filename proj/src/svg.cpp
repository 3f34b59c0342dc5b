#include "nngp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace nngp {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e4))
    std::snprintf(buf, sizeof buf, "%.0e", v);
  else
    std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo, hi;
  bool log;
  double pixel_lo, pixel_hi;

  double map(double v) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    return pixel_lo + (a - l) / (h - l) * (pixel_hi - pixel_lo);
  }
  bool contains(double v) const {
    return std::isfinite(v) && (!log || v > 0.0) && v >= lo - 1e-12 * std::abs(lo) &&
           v <= hi + 1e-12 * std::abs(hi);
  }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (int e = static_cast<int>(std::floor(std::log10(lo)));
           e <= static_cast<int>(std::ceil(std::log10(hi))); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
      }
      return t;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
      t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
  }
};

void data_range(const std::vector<Series>& series, bool x, bool log, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (const auto& s : series) {
    const auto& v = x ? s.x : s.y;
    for (double a : v)
      if (std::isfinite(a) && (!log || a > 0.0)) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
  }
  if (!std::isfinite(lo)) {
    lo = log ? 1.0 : 0.0;
    hi = log ? 10.0 : 1.0;
  }
  if (!(hi > lo)) {
    if (log) {
      lo /= 2;
      hi *= 2;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
}

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  double xlo, xhi, ylo, yhi;
  data_range(series, true, spec.log_x, xlo, xhi);
  if (spec.y_hi > spec.y_lo) {
    ylo = spec.y_lo;
    yhi = spec.y_hi;
  } else {
    data_range(series, false, spec.log_y, ylo, yhi);
    if (!spec.log_y) {
      const double pad = 0.05 * (yhi - ylo);
      yhi += pad;
      if (ylo != 0.0) ylo -= pad;
    }
  }
  const Axis ax{xlo, xhi, spec.log_x, left, spec.width - right};
  const Axis ay{ylo, yhi, spec.log_y, spec.height - bottom, top};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
         "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(spec.width / 2.0) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         escape(spec.title) + "</text>\n";

  // frame and ticks
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" +
         num(spec.width - left - right) + "\" height=\"" + num(spec.height - top - bottom) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    out += "<line x1=\"" + num(px) + "\" y1=\"" + num(spec.height - bottom) + "\" x2=\"" + num(px) +
           "\" y2=\"" + num(spec.height - bottom + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(px) + "\" y=\"" + num(spec.height - bottom + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           tick_label(t) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    out += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(left) +
           "\" y2=\"" + num(py) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(t) +
           "</text>\n";
  }
  out += "<text x=\"" + num((left + spec.width - right) / 2) + "\" y=\"" +
         num(spec.height - 12.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         escape(spec.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + num((top + spec.height - bottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 16 " +
         num((top + spec.height - bottom) / 2) + ")\">" + escape(spec.y_label) + "</text>\n";

  for (const auto& s : series) {
    const std::size_t count = std::min(s.x.size(), s.y.size());
    if (s.style == SeriesStyle::points) {
      for (std::size_t i = 0; i < count; ++i) {
        if (!ax.contains(s.x[i]) || !ay.contains(s.y[i])) continue;
        const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
        if (i < s.y_err.size() && s.y_err[i] > 0.0) {
          const double lo = std::max(s.y[i] - s.y_err[i], ylo);
          const double hi = std::min(s.y[i] + s.y_err[i], yhi);
          if (ay.contains(lo) && ay.contains(hi))
            out += "<line x1=\"" + num(px) + "\" y1=\"" + num(ay.map(lo)) + "\" x2=\"" + num(px) +
                   "\" y2=\"" + num(ay.map(hi)) + "\" stroke=\"" + s.color + "\"/>\n";
        }
        out += "<circle cx=\"" + num(px) + "\" cy=\"" + num(py) + "\" r=\"3\" fill=\"" + s.color +
               "\"/>\n";
      }
      continue;
    }
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < count; ++i) {
      if (!ax.contains(s.x[i]) || !ay.contains(s.y[i])) {
        pen = false;
        continue;
      }
      const double px = ax.map(s.x[i]), py = ay.map(s.y[i]);
      if (s.style == SeriesStyle::step && pen) {
        path += " H" + num(px);
        path += " V" + num(py);
      } else {
        path += (pen ? " L" : " M") + num(px) + " " + num(py);
      }
      pen = true;
    }
    if (!path.empty())
      out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + s.color +
             "\" stroke-width=\"1.5\"/>\n";
  }

  // legend
  double ly = top + 14;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    const double lx = spec.width - right - 190;
    out += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly - 8) + "\" width=\"12\" height=\"3\" fill=\"" +
           s.color + "\"/>\n";
    out += "<text x=\"" + num(lx + 18) + "\" y=\"" + num(ly - 3) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(s.label) + "</text>\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace nngp
