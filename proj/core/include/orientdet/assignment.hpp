#pragma once

#include <vector>

#include "orientdet/embedding.hpp"
#include "orientdet/instance.hpp"

namespace orientdet {

// One positive training channel: GT index plus the (scale, cell, anchor)
// address it supervises, with the encoded regression target.
struct Match {
  int gt = 0;
  int scale = 0;
  CellIndex cell;
  int anchor = 0;
  EncodedTarget target;
};

struct AssignResult {
  std::vector<Match> matches;    // sorted by (gt, scale, cell.y, cell.x, anchor)
  std::vector<int> skipped_gts;  // GT indices that matched no channel anywhere
};

struct AssignOptions {
  double ratio_threshold = 4.0;  // anchor gate: max(r, 1/r) < threshold per dimension
};

// GT-to-channel assignment. Per scale, an anchor qualifies for a GT when both
// per-dimension size ratios pass the gate; each qualifying anchor claims the
// GT's center cell plus the nearest horizontal and vertical neighbor cells
// (by which half of the cell the center falls in; in-grid ones only, and a
// center exactly on the half line takes the right/down neighbor). Competing
// claims on one channel resolve by larger IoU between the GT and an
// anchor-sized box centered in that cell, then by lower GT index.
//
// Preconditions: every GT box inside the input frame, orientation present.
// GTs that qualify nowhere are reported in skipped_gts, not an error.
AssignResult assign(const std::vector<AnnotatedInstance>& gts, const GridSpec& grid,
                    const AnchorSet& anchors, const AssignOptions& options = {});

}  // namespace orientdet
