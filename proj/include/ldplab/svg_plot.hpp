#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ldplab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = true;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Self-contained SVG line plot. Non-finite points and non-positive values on log axes are skipped.
void write_svg_plot(const PlotSpec& spec, std::span<const PlotSeries> series, std::ostream& out);

}  // namespace ldplab
