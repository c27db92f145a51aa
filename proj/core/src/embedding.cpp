#include "orientdet/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace orientdet {

GridSpec::GridSpec(int w, int h, std::array<int, kNumScales> s) : input_w(w), input_h(h), strides(s) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("GridSpec: input size must be positive");
  int prev = 0;
  for (int stride : strides) {
    if (stride <= prev) throw std::invalid_argument("GridSpec: strides must be strictly ascending");
    prev = stride;
    if (w % stride != 0 || h % stride != 0) {
      throw std::invalid_argument("GridSpec: input size " + std::to_string(w) + "x" +
                                  std::to_string(h) + " not divisible by stride " +
                                  std::to_string(stride));
    }
  }
}

std::int64_t GridSpec::total_channels() const {
  std::int64_t n = 0;
  for (int s = 0; s < kNumScales; ++s) n += channels_at(s);
  return n;
}

AnchorSet::AnchorSet(std::array<std::array<AnchorShape, kNumAnchors>, kNumScales> s) : shapes(s) {
  for (const auto& scale : shapes) {
    for (const auto& a : scale) {
      if (!(a.w > 0.0) || !(a.h > 0.0)) {
        throw std::invalid_argument("AnchorSet: anchor dimensions must be positive");
      }
    }
  }
}

RawPrediction::RawPrediction(const GridSpec& grid) {
  for (int s = 0; s < kNumScales; ++s) {
    gw[s] = grid.grid_w(s);
    gh[s] = grid.grid_h(s);
    values[s].assign(std::size_t(gw[s]) * gh[s] * kNumAnchors * kNumFields, 0.0);
  }
}

void RawPrediction::fill(double v) {
  for (auto& block : values) std::fill(block.begin(), block.end(), v);
}

std::int64_t RawPrediction::total_coords() const {
  std::int64_t n = 0;
  for (const auto& block : values) n += std::int64_t(block.size());
  return n;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

Box2D decode_box(const double* l, const GridSpec& grid, int scale, CellIndex cell,
                 const AnchorShape& anchor) {
  const double stride = grid.strides[scale];
  const double sx = sigmoid(l[kFieldX]);
  const double sy = sigmoid(l[kFieldY]);
  const double sw = sigmoid(l[kFieldW]);
  const double sh = sigmoid(l[kFieldH]);
  Box2D b;
  b.cx = (2.0 * sx - 0.5 + cell.x) * stride;
  b.cy = (2.0 * sy - 0.5 + cell.y) * stride;
  b.w = (2.0 * sw) * (2.0 * sw) * anchor.w;
  b.h = (2.0 * sh) * (2.0 * sh) * anchor.h;
  return b;
}

UnifiedEmbedding decode(const double* l, const GridSpec& grid, const AnchorSet& anchors, int scale,
                        CellIndex cell, int anchor) {
  UnifiedEmbedding e;
  e.objectness = sigmoid(l[kFieldObj]);
  e.box = decode_box(l, grid, scale, cell, anchors.at(scale, anchor));
  e.class_score = sigmoid(l[kFieldCls]);
  e.orientation_unit = sigmoid(l[kFieldOri]);
  return e;
}

UnifiedEmbedding decode(const RawPrediction& raw, const GridSpec& grid, const AnchorSet& anchors,
                        int scale, CellIndex cell, int anchor) {
  return decode(raw.at(scale, cell, anchor), grid, anchors, scale, cell, anchor);
}

EncodedTarget encode_target(const AnnotatedInstance& gt, const GridSpec& grid,
                            const AnchorSet& anchors, int scale, CellIndex cell, int anchor) {
  if (!gt.orientation.has_value()) {
    throw std::invalid_argument("encode_target: instance has no orientation label");
  }
  if (cell.x < 0 || cell.y < 0 || cell.x >= grid.grid_w(scale) || cell.y >= grid.grid_h(scale)) {
    throw std::invalid_argument("encode_target: cell outside grid");
  }
  const double stride = grid.strides[scale];
  const double off_x = gt.box.cx / stride - cell.x;
  const double off_y = gt.box.cy / stride - cell.y;
  if (off_x < -0.5 || off_x > 1.5 || off_y < -0.5 || off_y > 1.5) {
    throw std::invalid_argument("encode_target: center offset (" + std::to_string(off_x) + ", " +
                                std::to_string(off_y) + ") not representable at this cell");
  }
  const AnchorShape& a = anchors.at(scale, anchor);
  const double rw = gt.box.w / a.w;
  const double rh = gt.box.h / a.h;
  if (!(rw > 0.0) || rw >= 4.0 || !(rh > 0.0) || rh >= 4.0) {
    throw std::invalid_argument("encode_target: size ratio (" + std::to_string(rw) + ", " +
                                std::to_string(rh) + ") outside (0, 4)");
  }
  EncodedTarget t;
  t.box = gt.box;
  t.orientation_unit = gt.orientation->unit();
  t.objectness_basis = 1.0;
  return t;
}

namespace {

double clamped_logit(double q, double logit_clamp) {
  if (q <= 0.0) return -logit_clamp;
  if (q >= 1.0) return logit_clamp;
  return std::clamp(std::log(q / (1.0 - q)), -logit_clamp, logit_clamp);
}

}  // namespace

void invert_target_logits(const EncodedTarget& target, const GridSpec& grid,
                          const AnchorSet& anchors, int scale, CellIndex cell, int anchor,
                          double logit_clamp, double out[kNumFields]) {
  const double stride = grid.strides[scale];
  const AnchorShape& a = anchors.at(scale, anchor);
  const double off_x = target.box.cx / stride - cell.x;
  const double off_y = target.box.cy / stride - cell.y;
  out[kFieldObj] = clamped_logit(target.objectness_basis, logit_clamp);
  out[kFieldX] = clamped_logit((off_x + 0.5) / 2.0, logit_clamp);
  out[kFieldY] = clamped_logit((off_y + 0.5) / 2.0, logit_clamp);
  out[kFieldW] = clamped_logit(0.5 * std::sqrt(target.box.w / a.w), logit_clamp);
  out[kFieldH] = clamped_logit(0.5 * std::sqrt(target.box.h / a.h), logit_clamp);
  out[kFieldCls] = 0.0;
  out[kFieldOri] = clamped_logit(target.orientation_unit, logit_clamp);
}

}  // namespace orientdet
