#pragma once

#include <string>
#include <vector>

namespace fracinterp::app {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Standalone SVG line plot with axes, ticks and a legend. Non-finite
/// points (and nonpositive ones on log axes) are skipped.
std::string line_plot_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace fracinterp::app
