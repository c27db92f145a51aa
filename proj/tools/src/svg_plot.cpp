#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace orientdet::tool {
namespace {

constexpr double kPi = 3.14159265358979323846;

void appendf(std::string& out, const char* fmt, double a, double b, double c = 0.0,
             double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  out += buf;
}

// Direction on screen (x right, y down) for a body orientation in degrees.
void screen_direction(double degrees, bool zero_up, bool clockwise, double* dx, double* dy) {
  const double r = degrees * kPi / 180.0;
  if (zero_up) {
    *dx = clockwise ? std::sin(r) : -std::sin(r);
    *dy = -std::cos(r);
  } else {
    *dx = std::cos(r);
    *dy = clockwise ? std::sin(r) : -std::sin(r);
  }
}

}  // namespace

std::string render_svg(const std::vector<PlotInstance>& instances, int width, int height,
                       bool zero_up, bool clockwise) {
  if (width <= 0 || height <= 0) throw std::runtime_error("plot: canvas must be positive");

  std::string svg;
  svg.reserve(512 + instances.size() * 256);
  char head[256];
  std::snprintf(head, sizeof(head),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %d %d\" "
                "width=\"%d\" height=\"%d\">\n",
                width, height, width, height);
  svg += head;
  svg +=
      "<defs><marker id=\"tip\" viewBox=\"0 0 6 6\" refX=\"5\" refY=\"3\" markerWidth=\"5\" "
      "markerHeight=\"5\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#00b7c2\"/>"
      "</marker></defs>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (const PlotInstance& inst : instances) {
    const Box2D& b = inst.box;
    svg += "<rect x=\"";
    appendf(svg, "%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\"", b.x1(), b.y1(), b.w, b.h);
    svg += " fill=\"none\" stroke=\"#ff9f1a\" stroke-width=\"1.5\"";
    if (inst.weak) svg += " stroke-dasharray=\"4 3\"";
    svg += "/>\n";

    if (inst.orientation_degrees) {
      double dx = 0.0, dy = 0.0;
      screen_direction(*inst.orientation_degrees, zero_up, clockwise, &dx, &dy);
      const double len = std::max(6.0, 0.45 * std::min(b.w, b.h));
      svg += "<line x1=\"";
      appendf(svg, "%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"", b.cx, b.cy, b.cx + len * dx,
              b.cy + len * dy);
      svg += " stroke=\"#00b7c2\" stroke-width=\"1.5\" marker-end=\"url(#tip)\"/>\n";
    }
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace orientdet::tool
