#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "orientdet/geometry.hpp"
#include "orientdet/instance.hpp"

namespace orientdet {

inline constexpr int kNumScales = 4;
inline constexpr int kNumAnchors = 3;
inline constexpr int kNumFields = 7;

// Per-channel field layout: (objectness, x, y, w, h, class, orientation).
enum EmbeddingField : int {
  kFieldObj = 0,
  kFieldX = 1,
  kFieldY = 2,
  kFieldW = 3,
  kFieldH = 4,
  kFieldCls = 5,
  kFieldOri = 6,
};

// Grid cell, (x = column, y = row).
struct CellIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

// Multi-scale grid geometry over the letterboxed input frame.
struct GridSpec {
  int input_w = 0;
  int input_h = 0;
  std::array<int, kNumScales> strides{8, 16, 32, 64};

  GridSpec(int w, int h, std::array<int, kNumScales> s = {8, 16, 32, 64});

  int grid_w(int scale) const { return input_w / strides[scale]; }
  int grid_h(int scale) const { return input_h / strides[scale]; }
  std::int64_t channels_at(int scale) const {
    return std::int64_t(grid_w(scale)) * grid_h(scale) * kNumAnchors;
  }
  std::int64_t total_channels() const;
};

struct AnchorShape {
  double w = 0.0;
  double h = 0.0;
};

// Three anchor shapes per scale, in input-frame pixels.
struct AnchorSet {
  std::array<std::array<AnchorShape, kNumAnchors>, kNumScales> shapes;

  explicit AnchorSet(std::array<std::array<AnchorShape, kNumAnchors>, kNumScales> s);
  const AnchorShape& at(int scale, int anchor) const { return shapes[scale][anchor]; }
};

// Raw head output (or any tensor of the same shape, e.g. a gradient):
// per scale a dense [row][col][anchor][field] block of doubles.
struct RawPrediction {
  std::array<int, kNumScales> gw{};
  std::array<int, kNumScales> gh{};
  std::array<std::vector<double>, kNumScales> values;

  explicit RawPrediction(const GridSpec& grid);

  std::size_t offset(int scale, CellIndex cell, int anchor) const {
    return ((std::size_t(cell.y) * gw[scale] + cell.x) * kNumAnchors + anchor) * kNumFields;
  }
  double* at(int scale, CellIndex cell, int anchor) {
    return values[scale].data() + offset(scale, cell, anchor);
  }
  const double* at(int scale, CellIndex cell, int anchor) const {
    return values[scale].data() + offset(scale, cell, anchor);
  }
  void fill(double v);
  std::int64_t total_coords() const;
};

// Decoded view of one channel.
struct UnifiedEmbedding {
  double objectness = 0.0;      // sigma(t_obj), in (0, 1)
  Box2D box;                    // input-frame pixels
  double class_score = 0.0;     // sigma(t_cls); carried, not trained
  double orientation_unit = 0.0;

  double orientation_degrees() const { return orientation_unit * 360.0; }
};

// Numerically stable logistic helpers, used across the loss stack.
double sigmoid(double x);
double softplus(double x);  // log(1 + exp(x))

// Decode one channel's seven logits:
//   center = (2*sigma(t_xy) - 0.5 + cell) * stride
//   size   = (2*sigma(t_wh))^2 * anchor
UnifiedEmbedding decode(const double* logits, const GridSpec& grid, const AnchorSet& anchors,
                        int scale, CellIndex cell, int anchor);
UnifiedEmbedding decode(const RawPrediction& raw, const GridSpec& grid, const AnchorSet& anchors,
                        int scale, CellIndex cell, int anchor);
Box2D decode_box(const double* logits, const GridSpec& grid, int scale, CellIndex cell,
                 const AnchorShape& anchor);

// Regression target for one (scale, cell, anchor) channel. objectness_basis
// is the target the objectness channel would drive toward for an ideal box.
struct EncodedTarget {
  Box2D box;                    // GT box, input-frame pixels
  double orientation_unit = 0.0;
  double objectness_basis = 1.0;
};

// Validates representability at the channel: center offset from the cell
// origin within [-0.5, 1.5] cells (closed; the boundary arises when a GT
// center sits exactly on a cell-half line) and per-dimension size ratio to
// the anchor inside (0, 4). Throws std::invalid_argument otherwise.
EncodedTarget encode_target(const AnnotatedInstance& gt, const GridSpec& grid,
                            const AnchorSet& anchors, int scale, CellIndex cell, int anchor);

// Invert the decode map field by field, clamping each logit to
// [-logit_clamp, logit_clamp] (the map is only asymptotically onto at the
// boundaries). The class logit has no target and is set to 0.
void invert_target_logits(const EncodedTarget& target, const GridSpec& grid,
                          const AnchorSet& anchors, int scale, CellIndex cell, int anchor,
                          double logit_clamp, double out[kNumFields]);

}  // namespace orientdet
