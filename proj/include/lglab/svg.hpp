#pragma once

#include <string>
#include <vector>

namespace lglab {

/// One polyline on a plot.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Renders axes, ticks, a legend, and one polyline per series. Pure
/// function of its arguments; byte-identical output for identical input.
std::string render_svg(const std::vector<Series>& series,
                       const PlotSpec& spec);

}  // namespace lglab
