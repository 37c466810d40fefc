#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slicer {

using Rgb = std::array<std::uint8_t, 3>;

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0, 0, 0};
  bool dashed = false;
};

// Shaded region between lo and hi.
struct PlotBand {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
  Rgb color{200, 200, 200};
};

struct LinePlot {
  std::vector<PlotSeries> series;
  std::vector<PlotBand> bands;
  int width = 640;
  int height = 400;
};

// Rasterizes the plot (axes, min/max tick labels, bands, lines) into an RGB PNG.
void write_line_plot(const LinePlot& plot, const std::filesystem::path& path);

}  // namespace slicer
