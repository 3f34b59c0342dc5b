#pragma once

#include <string>
#include <vector>

namespace nngp {

enum class SeriesStyle { line, step, points };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;  // optional error bars (points style)
  SeriesStyle style = SeriesStyle::line;
  std::string color = "#1f77b4";
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  // Optional fixed y range; when lo >= hi the range comes from the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
  int width = 720;
  int height = 480;
};

// Static SVG from the series; output depends only on the inputs. Non-finite
// or out-of-range points are dropped (lines break there).
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace nngp
