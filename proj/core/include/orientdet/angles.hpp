#pragma once

namespace orientdet {

// Body orientation on the unit circle. Degrees live in [0, 360), the unit
// representation in [0, 1); they are locked together (unit = degrees / 360).
class OrientationAngle {
 public:
  static OrientationAngle from_degrees(double degrees);  // accepts [0, 360], 360 -> 0
  static OrientationAngle from_unit(double unit);        // accepts [0, 1], 1 -> 0

  double degrees() const { return degrees_; }
  double unit() const { return degrees_ / 360.0; }

 private:
  explicit OrientationAngle(double degrees) : degrees_(degrees) {}
  double degrees_ = 0.0;
};

// Shortest circular distance between unit angles in [0, 1): min(|a-b|, 1-|a-b|).
// Result in [0, 0.5]. Inputs outside [0, 1) are rejected.
double wrapped_unit_distance(double a, double b);

// Same on degrees in [0, 360): min(|a-b|, 360-|a-b|), result in [0, 180].
double wrapped_deg_error(double a, double b);

}  // namespace orientdet
