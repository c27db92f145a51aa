#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "orientdet/embedding.hpp"

using namespace orientdet;

namespace {

AnchorSet one_anchor_everywhere(AnchorShape a) {
  std::array<std::array<AnchorShape, kNumAnchors>, kNumScales> s;
  for (auto& per_scale : s) per_scale.fill(a);
  return AnchorSet(s);
}

}  // namespace

TEST_CASE("grid channel counts multiply out") {
  const GridSpec grid(1024, 1024);
  CHECK(grid.grid_w(0) == 128);
  CHECK(grid.grid_h(3) == 16);
  CHECK(grid.channels_at(0) == 128 * 128 * 3);
  CHECK(grid.total_channels() == 65280);

  const GridSpec small(192, 192);
  CHECK(small.total_channels() == (24 * 24 + 12 * 12 + 6 * 6 + 3 * 3) * 3);
}

TEST_CASE("raw prediction is seven doubles per channel") {
  const GridSpec grid(192, 192);
  RawPrediction raw(grid);
  CHECK(raw.total_coords() == grid.total_channels() * kNumFields);
  raw.fill(0.25);
  CHECK(raw.values[1][0] == 0.25);
  double* ch = raw.at(2, CellIndex{1, 2}, 1);
  ch[kFieldOri] = 0.9;
  CHECK(raw.at(2, CellIndex{1, 2}, 1)[kFieldOri] == 0.9);
  CHECK(raw.at(2, CellIndex{1, 2}, 0)[kFieldOri] == 0.25);
}

TEST_CASE("zero logits decode to the cell-plus-half center and anchor size") {
  const GridSpec grid(1024, 1024);
  const AnchorSet anchors = one_anchor_everywhere({16.0, 24.0});
  double logits[kNumFields] = {0, 0, 0, 0, 0, 0, 0};
  const UnifiedEmbedding e = decode(logits, grid, anchors, 0, CellIndex{3, 4}, 0);
  // 2*sigma(0) - 0.5 = 0.5 cells past the corner, stride 8.
  CHECK(e.box.cx == doctest::Approx(28.0).epsilon(1e-12));
  CHECK(e.box.cy == doctest::Approx(36.0).epsilon(1e-12));
  CHECK(e.box.w == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(e.box.h == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(e.objectness == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(e.class_score == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(e.orientation_unit == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(e.orientation_degrees() == doctest::Approx(180.0).epsilon(1e-12));
}

TEST_CASE("decode ranges: centers within their bands, sizes within four anchors") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({10.0, 20.0});
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> logit(-12.0, 12.0);
  for (int i = 0; i < 1000; ++i) {
    double logits[kNumFields];
    for (double& v : logits) v = logit(rng);
    const UnifiedEmbedding e = decode(logits, grid, anchors, 1, CellIndex{2, 3}, 0);
    // Center offset spans (-0.5, 1.5) cells around the cell corner.
    CHECK(e.box.cx > (2.0 - 0.5) * 16.0);
    CHECK(e.box.cx < (2.0 + 1.5) * 16.0);
    CHECK(e.box.cy > (3.0 - 0.5) * 16.0);
    CHECK(e.box.cy < (3.0 + 1.5) * 16.0);
    CHECK(e.box.w > 0.0);
    CHECK(e.box.w < 4.0 * 10.0);
    CHECK(e.box.h < 4.0 * 20.0);
    CHECK(e.objectness > 0.0);
    CHECK(e.objectness < 1.0);
    CHECK(e.orientation_unit > 0.0);
    CHECK(e.orientation_unit < 1.0);
  }
}

TEST_CASE("orientation decode is monotone in the logit") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({10.0, 20.0});
  double prev = -1.0;
  for (double t = -6.0; t <= 6.0; t += 0.25) {
    double logits[kNumFields] = {0, 0, 0, 0, 0, 0, t};
    const UnifiedEmbedding e = decode(logits, grid, anchors, 0, CellIndex{0, 0}, 0);
    CHECK(e.orientation_unit > prev);
    prev = e.orientation_unit;
  }
}

TEST_CASE("zero size logits reproduce the anchor exactly") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({13.0, 7.0});
  double logits[kNumFields] = {0, 0, 0, 0, 0, 0, 0};
  const UnifiedEmbedding e = decode(logits, grid, anchors, 2, CellIndex{1, 1}, 2);
  CHECK(e.box.w == doctest::Approx(13.0).epsilon(1e-12));
  CHECK(e.box.h == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("encode rejects what the channel cannot represent") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({10.0, 20.0});
  AnnotatedInstance gt;
  gt.image_id = 1;
  gt.annotation_id = 1;
  gt.orientation = OrientationAngle::from_degrees(90.0);

  // Representable: center inside cell (2, 3) at stride 8, near-anchor size.
  gt.box = Box2D(20.0, 28.0, 10.0, 20.0);
  const EncodedTarget t = encode_target(gt, grid, anchors, 0, CellIndex{2, 3}, 0);
  CHECK(t.orientation_unit == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t.box.cx == 20.0);

  // Center two cells away: offset outside [-0.5, 1.5].
  CHECK_THROWS_AS(encode_target(gt, grid, anchors, 0, CellIndex{6, 3}, 0), std::invalid_argument);
  // Width ratio at the open boundary (4x anchor) is rejected.
  gt.box = Box2D(20.0, 28.0, 40.0, 20.0);
  CHECK_THROWS_AS(encode_target(gt, grid, anchors, 0, CellIndex{2, 3}, 0), std::invalid_argument);
  // Missing orientation is rejected.
  gt.box = Box2D(20.0, 28.0, 10.0, 20.0);
  gt.orientation.reset();
  CHECK_THROWS_AS(encode_target(gt, grid, anchors, 0, CellIndex{2, 3}, 0), std::invalid_argument);
}

TEST_CASE("inverted logits decode back to the target") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({10.0, 20.0});
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> cent(0.35, 0.65);  // away from the offset clamp
  std::uniform_real_distribution<double> scale(0.6, 1.6);   // well inside the ratio gate
  std::uniform_real_distribution<double> ang(0.05, 0.95);   // away from the unit clamp
  for (int i = 0; i < 300; ++i) {
    const int cx_cell = 3, cy_cell = 4;
    AnnotatedInstance gt;
    gt.image_id = 1;
    gt.annotation_id = i;
    gt.orientation = OrientationAngle::from_unit(ang(rng));
    gt.box = Box2D((cx_cell + cent(rng)) * 8.0, (cy_cell + cent(rng)) * 8.0, 10.0 * scale(rng),
                   20.0 * scale(rng));
    const EncodedTarget target = encode_target(gt, grid, anchors, 0, CellIndex{cx_cell, cy_cell}, 0);
    double logits[kNumFields];
    invert_target_logits(target, grid, anchors, 0, CellIndex{cx_cell, cy_cell}, 0, 50.0, logits);
    const UnifiedEmbedding e = decode(logits, grid, anchors, 0, CellIndex{cx_cell, cy_cell}, 0);
    CHECK(e.box.cx == doctest::Approx(gt.box.cx).epsilon(0).scale(1).abs(1e-6));
    CHECK(e.box.cy == doctest::Approx(gt.box.cy).epsilon(0).scale(1).abs(1e-6));
    CHECK(e.box.w == doctest::Approx(gt.box.w).epsilon(1e-6));
    CHECK(e.box.h == doctest::Approx(gt.box.h).epsilon(1e-6));
    CHECK(e.orientation_unit ==
          doctest::Approx(gt.orientation->unit()).epsilon(0).scale(1).abs(1e-6));
    CHECK(logits[kFieldCls] == 0.0);
  }
}

TEST_CASE("inversion respects the logit clamp") {
  const GridSpec grid(192, 192);
  const AnchorSet anchors = one_anchor_everywhere({10.0, 20.0});
  AnnotatedInstance gt;
  gt.image_id = 1;
  gt.annotation_id = 1;
  gt.orientation = OrientationAngle::from_unit(0.999);  // needs a huge logit
  gt.box = Box2D(28.0, 36.0, 10.0, 20.0);
  const EncodedTarget target = encode_target(gt, grid, anchors, 0, CellIndex{3, 4}, 0);
  double logits[kNumFields];
  invert_target_logits(target, grid, anchors, 0, CellIndex{3, 4}, 0, 3.0, logits);
  for (int f = 0; f < kNumFields; ++f) {
    CHECK(std::abs(logits[f]) <= 3.0 + 1e-15);
  }
  CHECK(logits[kFieldOri] == doctest::Approx(3.0));
  CHECK(logits[kFieldObj] == doctest::Approx(3.0));
}

TEST_CASE("logistic helpers are stable at extreme arguments") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-1000.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(softplus(1000.0)));
  CHECK(softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(softplus(-1000.0) == doctest::Approx(0.0));
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // The identity softplus(x) - softplus(-x) = x.
  for (double x = -5.0; x <= 5.0; x += 0.5) {
    CHECK(softplus(x) - softplus(-x) == doctest::Approx(x).epsilon(0).scale(1).abs(1e-12));
  }
}

TEST_CASE("grid spec rejects frames that do not tile") {
  CHECK_THROWS_AS(GridSpec(1000, 1024), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec(0, 64), std::invalid_argument);
}
