#include "orientdet/angles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace orientdet {

OrientationAngle OrientationAngle::from_degrees(double degrees) {
  if (!std::isfinite(degrees) || degrees < 0.0 || degrees > 360.0) {
    throw std::invalid_argument("orientation degrees out of range [0, 360]: " +
                                std::to_string(degrees));
  }
  if (degrees == 360.0) degrees = 0.0;
  return OrientationAngle(degrees);
}

OrientationAngle OrientationAngle::from_unit(double unit) {
  if (!std::isfinite(unit) || unit < 0.0 || unit > 1.0) {
    throw std::invalid_argument("orientation unit out of range [0, 1]: " + std::to_string(unit));
  }
  if (unit == 1.0) unit = 0.0;
  return OrientationAngle(unit * 360.0);
}

double wrapped_unit_distance(double a, double b) {
  if (!(a >= 0.0 && a < 1.0) || !(b >= 0.0 && b < 1.0)) {
    throw std::invalid_argument("wrapped_unit_distance: inputs must lie in [0, 1)");
  }
  const double d = std::fabs(a - b);
  return d <= 0.5 ? d : 1.0 - d;
}

double wrapped_deg_error(double a, double b) {
  if (!(a >= 0.0 && a < 360.0) || !(b >= 0.0 && b < 360.0)) {
    throw std::invalid_argument("wrapped_deg_error: inputs must lie in [0, 360)");
  }
  const double d = std::fabs(a - b);
  return d <= 180.0 ? d : 360.0 - d;
}

}  // namespace orientdet
