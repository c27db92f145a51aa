#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "orientdet/geometry.hpp"

using namespace orientdet;

namespace {

// Central finite difference of f over one box coordinate.
template <typename F>
double fd(const F& f, Box2D b, int coord, double eps) {
  double* fields[4] = {&b.cx, &b.cy, &b.w, &b.h};
  const double saved = *fields[coord];
  *fields[coord] = saved + eps;
  const double hi = f(b);
  *fields[coord] = saved - eps;
  const double lo = f(b);
  return (hi - lo) / (2.0 * eps);
}

}  // namespace

TEST_CASE("iou of the quarter-overlap pair is exactly one seventh") {
  const Box2D a(0.0, 0.0, 2.0, 2.0);
  const Box2D b(1.0, 1.0, 2.0, 2.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(b, a) == iou(a, b));
}

TEST_CASE("ciou subtracts the center penalty for equal aspect ratios") {
  // Same pair: rho^2 = 2, enclosing diagonal^2 = 18, v = 0, so
  // ciou = 1/7 - 2/18 = 2/63.
  const Box2D a(0.0, 0.0, 2.0, 2.0);
  const Box2D b(1.0, 1.0, 2.0, 2.0);
  CHECK(ciou(a, b) == doctest::Approx(2.0 / 63.0).epsilon(1e-12));
  CHECK(ciou(b, a) == doctest::Approx(ciou(a, b)).epsilon(1e-15));
}

TEST_CASE("identical boxes score perfect under both overlaps") {
  const Box2D b(3.5, -2.0, 4.0, 9.0);
  CHECK(iou(b, b) == 1.0);
  CHECK(ciou(b, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("disjoint boxes have zero iou and negative ciou") {
  const Box2D a(0.0, 0.0, 2.0, 2.0);
  const Box2D b(10.0, 0.0, 2.0, 2.0);
  CHECK(iou(a, b) == 0.0);
  CHECK(ciou(a, b) < 0.0);
  CHECK(ciou(a, b) > -1.0);
}

TEST_CASE("corners round-trip and reject inverted extents") {
  const Box2D b(25.0, 40.0, 30.0, 40.0);
  const Corners c = to_corners(b);
  CHECK(c.x1 == doctest::Approx(10.0));
  CHECK(c.y1 == doctest::Approx(20.0));
  CHECK(c.x2 == doctest::Approx(40.0));
  CHECK(c.y2 == doctest::Approx(60.0));
  const Box2D back = from_corners(c);
  CHECK(back.cx == doctest::Approx(b.cx));
  CHECK(back.w == doctest::Approx(b.w));
  CHECK_THROWS_AS(from_corners(Corners{5.0, 0.0, 5.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(from_corners(Corners{5.0, 0.0, 1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Box2D(0.0, 0.0, -1.0, 2.0), std::invalid_argument);
}

TEST_CASE("ciou never exceeds iou and both stay bounded on random pairs") {
  std::mt19937_64 rng(7151);
  std::uniform_real_distribution<double> center(-20.0, 20.0);
  std::uniform_real_distribution<double> size(0.5, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const Box2D a(center(rng), center(rng), size(rng), size(rng));
    const Box2D b(center(rng), center(rng), size(rng), size(rng));
    const double u = iou(a, b);
    const double cu = ciou(a, b);
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
    CHECK(cu <= u + 1e-12);
    CHECK(cu > -1.0);
    CHECK(cu <= 1.0);
  }
}

TEST_CASE("overlap gradients match finite differences away from ties") {
  std::mt19937_64 rng(90210);
  std::uniform_real_distribution<double> center(-8.0, 8.0);
  std::uniform_real_distribution<double> size(2.0, 12.0);
  const double eps = 1e-6;
  int accepted = 0;
  for (int i = 0; i < 400 && accepted < 200; ++i) {
    const Box2D pred(center(rng), center(rng), size(rng), size(rng));
    const Box2D gt(center(rng), center(rng), size(rng), size(rng));
    // Keep clear of the piecewise switches: corner ties and zero overlap.
    const Corners cp = to_corners(pred);
    const Corners cg = to_corners(gt);
    const double tie = std::min(std::min(std::abs(cp.x1 - cg.x1), std::abs(cp.x2 - cg.x2)),
                                std::min(std::abs(cp.y1 - cg.y1), std::abs(cp.y2 - cg.y2)));
    if (tie < 1e-3 || iou(pred, gt) < 1e-3) continue;
    ++accepted;

    const BoxGrad gi = iou_with_grad(pred, gt);
    const BoxGrad gc = ciou_with_grad(pred, gt);
    CHECK(gi.value == doctest::Approx(iou(pred, gt)).epsilon(1e-12));
    CHECK(gc.value == doctest::Approx(ciou(pred, gt)).epsilon(1e-12));

    const double analytic_i[4] = {gi.d_cx, gi.d_cy, gi.d_w, gi.d_h};
    const double analytic_c[4] = {gc.d_cx, gc.d_cy, gc.d_w, gc.d_h};
    for (int coord = 0; coord < 4; ++coord) {
      const double ni = fd([&](const Box2D& p) { return iou(p, gt); }, pred, coord, eps);
      const double nc = fd([&](const Box2D& p) { return ciou(p, gt); }, pred, coord, eps);
      CHECK(analytic_i[coord] ==
            doctest::Approx(ni).epsilon(0).scale(1).abs(1e-5 * std::max(1.0, std::abs(ni))));
      CHECK(analytic_c[coord] ==
            doctest::Approx(nc).epsilon(0).scale(1).abs(1e-5 * std::max(1.0, std::abs(nc))));
    }
  }
  CHECK(accepted == 200);
}
