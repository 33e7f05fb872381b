#pragma once

#include <string>
#include <vector>

namespace cli {

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title, xLabel, yLabel;
  bool logX = false, logY = false;
};

// Static line plot; points that cannot be shown on a log axis are dropped.
std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace cli
