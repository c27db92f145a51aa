#pragma once

#include <optional>
#include <string>
#include <vector>

#include "orientdet/geometry.hpp"

namespace orientdet::tool {

struct PlotInstance {
  Box2D box;
  std::optional<double> orientation_degrees;  // no arrow when absent
  bool weak = false;                          // weak boxes are dashed
};

// Audit plot: one rectangle per instance plus an orientation arrow from the
// box center. Screen convention is configurable; the default (zero_up,
// clockwise) puts 0 degrees straight up and 90 to the right. Output bytes
// are a pure function of the inputs; zero instances give a valid empty
// canvas.
std::string render_svg(const std::vector<PlotInstance>& instances, int width, int height,
                       bool zero_up, bool clockwise);

}  // namespace orientdet::tool
