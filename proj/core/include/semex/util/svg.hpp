#pragma once

#include <string>
#include <vector>

namespace semex::util {

// Line plots emitted as standalone SVG. Nothing clever: enough for metric
// curves and per-step trajectory plots with event markers.

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;  // empty picks from a fixed palette
};

// Vertical event marker at x with a short label near the top.
struct Marker {
  double x = 0.0;
  std::string label;
  std::string color = "#888888";
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  int width = 720, height = 440;
};

std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series,
                             const std::vector<Marker>& markers = {});
void write_line_plot(const std::string& path, const PlotSpec& spec,
                     const std::vector<Series>& series,
                     const std::vector<Marker>& markers = {});

}  // namespace semex::util
