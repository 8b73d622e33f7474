#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spiral/spirals.hpp"

namespace spiral {

struct PlotOverlay {
  /// Rays from the origin, e.g. failing net directions.
  std::vector<std::vector<double>> origin_rays;
  /// Rays from ray_start, e.g. the directions of a visible-point test.
  std::vector<double> ray_start;
  std::vector<std::vector<double>> start_rays;
  /// Point indices to ring (witnesses).
  std::vector<std::int64_t> highlight;
  /// Horizontal band lo < y < hi.
  std::optional<std::array<double, 2>> strip;
};

struct PlotOptions {
  double T = 30.0;
  /// Marker radius in data units when positive (rings use it too).
  double eps = 0.0;
  int size = 800;
  std::string title;
  /// Written to <desc>; the CLI stores its run config here.
  std::string description;
};

/// SVG scatter of the chunk's points in B(0, T), projected on the first two
/// coordinates. Output is a pure function of the inputs.
std::string render_svg(const PointChunk& chunk, const PlotOptions& options, const PlotOverlay& overlay = {});

}  // namespace spiral
