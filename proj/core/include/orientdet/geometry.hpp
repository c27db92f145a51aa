#pragma once

namespace orientdet {

// Axis-aligned box, center/size parameterization, pixel units.
// Width and height must be strictly positive for a valid box; the
// default-constructed state is only a placeholder for containers.
struct Box2D {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  Box2D() = default;
  Box2D(double cx_, double cy_, double w_, double h_);

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
};

struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

Corners to_corners(const Box2D& b);
Box2D from_corners(const Corners& c);  // rejects empty/inverted extents

// Intersection over union, in [0, 1]. Zero-overlap pairs give exactly 0.
double iou(const Box2D& a, const Box2D& b);

// Complete IoU: IoU - rho^2/c^2 - alpha*v, in (-1, 1].
//   rho^2 = squared center distance, c^2 = squared enclosing-box diagonal,
//   v = (4/pi^2)(atan(w_a/h_a) - atan(w_b/h_b))^2, alpha = v/((1-IoU)+v+eps).
double ciou(const Box2D& a, const Box2D& b);

// Value plus derivative with respect to the *first* box's (cx, cy, w, h).
// alpha is differentiated too (it depends smoothly on IoU and v); piecewise
// switches (corner min/max ties, zero-overlap boundary) use strict compares.
struct BoxGrad {
  double value = 0.0;
  double d_cx = 0.0;
  double d_cy = 0.0;
  double d_w = 0.0;
  double d_h = 0.0;
};

BoxGrad iou_with_grad(const Box2D& pred, const Box2D& gt);
BoxGrad ciou_with_grad(const Box2D& pred, const Box2D& gt);

}  // namespace orientdet
