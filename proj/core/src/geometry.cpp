#include "orientdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace orientdet {
namespace {

constexpr double kCiouEps = 1e-7;

void require_valid(const Box2D& b, const char* who) {
  if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.cx) || !std::isfinite(b.cy) ||
      !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw std::invalid_argument(std::string(who) + ": box needs finite center and positive extent");
  }
}

}  // namespace

Box2D::Box2D(double cx_, double cy_, double w_, double h_) : cx(cx_), cy(cy_), w(w_), h(h_) {
  require_valid(*this, "Box2D");
}

Corners to_corners(const Box2D& b) {
  require_valid(b, "to_corners");
  return {b.x1(), b.y1(), b.x2(), b.y2()};
}

Box2D from_corners(const Corners& c) {
  if (!(c.x2 > c.x1) || !(c.y2 > c.y1)) {
    throw std::invalid_argument("from_corners: empty or inverted extent");
  }
  return Box2D(0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1);
}

double iou(const Box2D& a, const Box2D& b) {
  require_valid(a, "iou");
  require_valid(b, "iou");
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

namespace {

// Shared forward pass. Derivatives are with respect to pred's (cx, cy, w, h);
// gt is constant. Corner sensitivities: x1 = cx - w/2, x2 = cx + w/2.
struct IouParts {
  double value = 0.0;
  // d(inter)/d(corner of pred), already gated by the min/max winners
  double d_cx = 0.0, d_cy = 0.0, d_w = 0.0, d_h = 0.0;
};

IouParts iou_parts(const Box2D& p, const Box2D& g) {
  IouParts r;
  const double px1 = p.x1(), px2 = p.x2(), py1 = p.y1(), py2 = p.y2();
  const double gx1 = g.x1(), gx2 = g.x2(), gy1 = g.y1(), gy2 = g.y2();
  const double iw = std::min(px2, gx2) - std::max(px1, gx1);
  const double ih = std::min(py2, gy2) - std::max(py1, gy1);
  const double pa = p.area(), ga = g.area();
  if (iw <= 0.0 || ih <= 0.0) {
    r.value = 0.0;
    // IoU = 0 on an open set: zero gradient everywhere here.
    return r;
  }
  const double inter = iw * ih;
  const double uni = pa + ga - inter;

  // d(iw)/d(px1) = -[px1 > gx1], d(iw)/d(px2) = [px2 < gx2]
  const double diw_dx1 = (px1 > gx1) ? -1.0 : 0.0;
  const double diw_dx2 = (px2 < gx2) ? 1.0 : 0.0;
  const double dih_dy1 = (py1 > gy1) ? -1.0 : 0.0;
  const double dih_dy2 = (py2 < gy2) ? 1.0 : 0.0;

  const double dI_dcx = ih * (diw_dx1 + diw_dx2);
  const double dI_dw = ih * (-0.5 * diw_dx1 + 0.5 * diw_dx2);
  const double dI_dcy = iw * (dih_dy1 + dih_dy2);
  const double dI_dh = iw * (-0.5 * dih_dy1 + 0.5 * dih_dy2);

  // U = pa + ga - I, d(pa)/dw = h, d(pa)/dh = w
  const double dU_dcx = -dI_dcx;
  const double dU_dcy = -dI_dcy;
  const double dU_dw = p.h - dI_dw;
  const double dU_dh = p.w - dI_dh;

  const double inv_u2 = 1.0 / (uni * uni);
  r.value = inter / uni;
  r.d_cx = (dI_dcx * uni - inter * dU_dcx) * inv_u2;
  r.d_cy = (dI_dcy * uni - inter * dU_dcy) * inv_u2;
  r.d_w = (dI_dw * uni - inter * dU_dw) * inv_u2;
  r.d_h = (dI_dh * uni - inter * dU_dh) * inv_u2;
  return r;
}

}  // namespace

double ciou(const Box2D& a, const Box2D& b) { return ciou_with_grad(a, b).value; }

BoxGrad iou_with_grad(const Box2D& pred, const Box2D& gt) {
  require_valid(pred, "iou_with_grad");
  require_valid(gt, "iou_with_grad");
  const IouParts p = iou_parts(pred, gt);
  return {p.value, p.d_cx, p.d_cy, p.d_w, p.d_h};
}

BoxGrad ciou_with_grad(const Box2D& pred, const Box2D& gt) {
  require_valid(pred, "ciou_with_grad");
  require_valid(gt, "ciou_with_grad");
  const IouParts ip = iou_parts(pred, gt);

  const double px1 = pred.x1(), px2 = pred.x2(), py1 = pred.y1(), py2 = pred.y2();
  const double gx1 = gt.x1(), gx2 = gt.x2(), gy1 = gt.y1(), gy2 = gt.y2();

  // Center-distance penalty rho^2 / c^2.
  const double dx = pred.cx - gt.cx;
  const double dy = pred.cy - gt.cy;
  const double rho2 = dx * dx + dy * dy;

  const double cw = std::max(px2, gx2) - std::min(px1, gx1);
  const double ch = std::max(py2, gy2) - std::min(py1, gy1);
  const double c2 = cw * cw + ch * ch;

  const double dcw_dx1 = (px1 < gx1) ? 1.0 : 0.0;  // ex1 = min(px1, gx1)
  const double dcw_dx2 = (px2 > gx2) ? 1.0 : 0.0;  // ex2 = max(px2, gx2)
  const double dch_dy1 = (py1 < gy1) ? 1.0 : 0.0;
  const double dch_dy2 = (py2 > gy2) ? 1.0 : 0.0;

  const double dcw_dcx = dcw_dx2 - dcw_dx1;
  const double dcw_dw = 0.5 * (dcw_dx2 + dcw_dx1);
  const double dch_dcy = dch_dy2 - dch_dy1;
  const double dch_dh = 0.5 * (dch_dy2 + dch_dy1);

  const double dc2_dcx = 2.0 * cw * dcw_dcx;
  const double dc2_dcy = 2.0 * ch * dch_dcy;
  const double dc2_dw = 2.0 * cw * dcw_dw;
  const double dc2_dh = 2.0 * ch * dch_dh;

  const double inv_c2 = 1.0 / c2;
  const double pen = rho2 * inv_c2;
  const double dpen_dcx = (2.0 * dx * c2 - rho2 * dc2_dcx) * inv_c2 * inv_c2;
  const double dpen_dcy = (2.0 * dy * c2 - rho2 * dc2_dcy) * inv_c2 * inv_c2;
  const double dpen_dw = (-rho2 * dc2_dw) * inv_c2 * inv_c2;
  const double dpen_dh = (-rho2 * dc2_dh) * inv_c2 * inv_c2;

  // Aspect-ratio term v and its weight alpha. alpha is a smooth function of
  // IoU and v; it is differentiated rather than frozen so the analytic
  // gradient is the true derivative of the computed value.
  constexpr double k4pi2 = 4.0 / (3.14159265358979323846 * 3.14159265358979323846);
  const double ang = std::atan(pred.w / pred.h) - std::atan(gt.w / gt.h);
  const double v = k4pi2 * ang * ang;
  const double denom_wh = pred.w * pred.w + pred.h * pred.h;
  const double dv_dw = 2.0 * k4pi2 * ang * (pred.h / denom_wh);
  const double dv_dh = 2.0 * k4pi2 * ang * (-pred.w / denom_wh);

  const double z = (1.0 - ip.value) + v + kCiouEps;
  const double alpha = v / z;
  // d(alpha)/dtheta = (dv*z - v*(dv - dIoU)) / z^2
  const double inv_z2 = 1.0 / (z * z);
  const double dalpha_dcx = (0.0 * z - v * (0.0 - ip.d_cx)) * inv_z2;
  const double dalpha_dcy = (0.0 * z - v * (0.0 - ip.d_cy)) * inv_z2;
  const double dalpha_dw = (dv_dw * z - v * (dv_dw - ip.d_w)) * inv_z2;
  const double dalpha_dh = (dv_dh * z - v * (dv_dh - ip.d_h)) * inv_z2;

  BoxGrad r;
  r.value = ip.value - pen - alpha * v;
  r.d_cx = ip.d_cx - dpen_dcx - dalpha_dcx * v;
  r.d_cy = ip.d_cy - dpen_dcy - dalpha_dcy * v;
  r.d_w = ip.d_w - dpen_dw - (dalpha_dw * v + alpha * dv_dw);
  r.d_h = ip.d_h - dpen_dh - (dalpha_dh * v + alpha * dv_dh);
  return r;
}

}  // namespace orientdet
