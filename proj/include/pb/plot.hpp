#pragma once

#include "pb/pdp.hpp"

#include <span>
#include <string>

namespace pb {

struct PlotOptions {
  int width = 640;
  int height = 400;
  std::string x_label = "Time";
  std::string y_label = "distance";
  std::string title;
  // Remap each profile to run from 1 to 0 and fix the y range to [0,1].
  bool normalize = false;
};

struct PlotSeries {
  std::string label;
  DistanceProfile profile;
};

struct PlotArea {
  double left, top, right, bottom;
};

PlotArea plot_area(const PlotOptions &opts);

// Line chart with one <polyline> per series over t in [0,1], plus axes and a
// legend.
std::string render_svg(std::span<const PlotSeries> series, const PlotOptions &opts);

} // namespace pb
