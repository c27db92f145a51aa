#include "orientdet/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

namespace orientdet {
namespace {

struct ChannelKey {
  int scale;
  int y;
  int x;
  int anchor;
  friend bool operator<(const ChannelKey& a, const ChannelKey& b) {
    return std::tie(a.scale, a.y, a.x, a.anchor) < std::tie(b.scale, b.y, b.x, b.anchor);
  }
};

struct Claim {
  int gt;
  double anchor_iou;  // IoU between the GT and an anchor-sized box in the cell
};

void check_inside_frame(const AnnotatedInstance& gt, int idx, const GridSpec& grid) {
  const Corners c = to_corners(gt.box);
  if (c.x1 < 0.0 || c.y1 < 0.0 || c.x2 > grid.input_w || c.y2 > grid.input_h) {
    throw std::invalid_argument("assign: GT " + std::to_string(idx) +
                                " lies outside the input frame");
  }
}

}  // namespace

AssignResult assign(const std::vector<AnnotatedInstance>& gts, const GridSpec& grid,
                    const AnchorSet& anchors, const AssignOptions& options) {
  if (!(options.ratio_threshold > 1.0)) {
    throw std::invalid_argument("assign: ratio_threshold must exceed 1");
  }
  std::map<ChannelKey, Claim> winners;

  for (int gi = 0; gi < int(gts.size()); ++gi) {
    const AnnotatedInstance& gt = gts[gi];
    check_inside_frame(gt, gi, grid);
    if (!gt.orientation.has_value()) {
      throw std::invalid_argument("assign: GT " + std::to_string(gi) + " has no orientation");
    }

    for (int s = 0; s < kNumScales; ++s) {
      const double stride = grid.strides[s];
      const int gw = grid.grid_w(s);
      const int gh = grid.grid_h(s);
      const double fx = gt.box.cx / stride;
      const double fy = gt.box.cy / stride;
      const int cx = std::min(int(std::floor(fx)), gw - 1);
      const int cy = std::min(int(std::floor(fy)), gh - 1);
      const double frac_x = fx - cx;
      const double frac_y = fy - cy;

      // Candidate cells: center plus one horizontal and one vertical neighbor.
      CellIndex cells[3];
      int n_cells = 0;
      cells[n_cells++] = {cx, cy};
      const int nx = frac_x < 0.5 ? cx - 1 : cx + 1;
      if (nx >= 0 && nx < gw) cells[n_cells++] = {nx, cy};
      const int ny = frac_y < 0.5 ? cy - 1 : cy + 1;
      if (ny >= 0 && ny < gh) cells[n_cells++] = {cx, ny};

      for (int a = 0; a < kNumAnchors; ++a) {
        const AnchorShape& an = anchors.at(s, a);
        const double rw = gt.box.w / an.w;
        const double rh = gt.box.h / an.h;
        if (std::max(rw, 1.0 / rw) >= options.ratio_threshold) continue;
        if (std::max(rh, 1.0 / rh) >= options.ratio_threshold) continue;

        for (int c = 0; c < n_cells; ++c) {
          const CellIndex cell = cells[c];
          const Box2D anchor_box((cell.x + 0.5) * stride, (cell.y + 0.5) * stride, an.w, an.h);
          const Claim claim{gi, iou(gt.box, anchor_box)};
          auto [it, inserted] = winners.try_emplace({s, cell.y, cell.x, a}, claim);
          if (!inserted && (claim.anchor_iou > it->second.anchor_iou ||
                            (claim.anchor_iou == it->second.anchor_iou && gi < it->second.gt))) {
            it->second = claim;
          }
        }
      }
    }
  }

  AssignResult result;
  result.matches.reserve(winners.size());
  for (const auto& [key, claim] : winners) {
    Match m;
    m.gt = claim.gt;
    m.scale = key.scale;
    m.cell = {key.x, key.y};
    m.anchor = key.anchor;
    m.target = encode_target(gts[claim.gt], grid, anchors, m.scale, m.cell, m.anchor);
    result.matches.push_back(m);
  }
  std::sort(result.matches.begin(), result.matches.end(), [](const Match& a, const Match& b) {
    return std::tie(a.gt, a.scale, a.cell.y, a.cell.x, a.anchor) <
           std::tie(b.gt, b.scale, b.cell.y, b.cell.x, b.anchor);
  });

  // A GT can fail the ratio gate everywhere, or lose every claimed channel
  // to competitors; either way it ends up with zero matches and is reported.
  std::vector<bool> present(gts.size(), false);
  for (const Match& m : result.matches) present[m.gt] = true;
  for (int gi = 0; gi < int(gts.size()); ++gi) {
    if (!present[gi]) result.skipped_gts.push_back(gi);
  }
  return result;
}

}  // namespace orientdet
