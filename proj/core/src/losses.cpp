#include "orientdet/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace orientdet {
namespace {

void check_shape(const RawPrediction& raw, const GridSpec& grid, const char* who) {
  for (int s = 0; s < kNumScales; ++s) {
    if (raw.gw[s] != grid.grid_w(s) || raw.gh[s] != grid.grid_h(s)) {
      throw std::invalid_argument(std::string(who) + ": tensor shape does not match grid");
    }
  }
}

// Circular distance without the range guard: sigma output can round to
// exactly 1.0 for very large logits, which still means "angle 0".
double wrap_dist(double a, double b) {
  const double d = std::fabs(a - b);
  return d <= 0.5 ? d : 1.0 - d;
}

// d(center)/d(logit) = 2*sigma'(t)*stride; d(size)/d(logit) = 8*sigma^2(1-sigma)*anchor.
struct BoxChain {
  Box2D box;
  double dcx_dtx, dcy_dty, dw_dtw, dh_dth;
};

BoxChain decode_box_chain(const double* l, const GridSpec& grid, int scale, CellIndex cell,
                          const AnchorShape& anchor) {
  const double stride = grid.strides[scale];
  const double sx = sigmoid(l[kFieldX]);
  const double sy = sigmoid(l[kFieldY]);
  const double sw = sigmoid(l[kFieldW]);
  const double sh = sigmoid(l[kFieldH]);
  BoxChain c;
  c.box.cx = (2.0 * sx - 0.5 + cell.x) * stride;
  c.box.cy = (2.0 * sy - 0.5 + cell.y) * stride;
  c.box.w = 4.0 * sw * sw * anchor.w;
  c.box.h = 4.0 * sh * sh * anchor.h;
  c.dcx_dtx = 2.0 * sx * (1.0 - sx) * stride;
  c.dcy_dty = 2.0 * sy * (1.0 - sy) * stride;
  c.dw_dtw = 8.0 * sw * sw * (1.0 - sw) * anchor.w;
  c.dh_dth = 8.0 * sh * sh * (1.0 - sh) * anchor.h;
  return c;
}

}  // namespace

void validate_weights(const LossWeights& w) {
  if (!(w.alpha >= 0.0) || !(w.beta >= 0.0) || !(w.lambda >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(w.tau >= 0.0) || !(w.tau <= 1.0)) {
    throw std::invalid_argument("tau must lie in [0, 1]");
  }
}

double orientation_loss(const RawPrediction& raw, const std::vector<Match>& matches,
                        const GridSpec& grid, const AnchorSet& anchors, double tau,
                        const LossOptions& options, double weight, RawPrediction* grad) {
  check_shape(raw, grid, "orientation_loss");
  (void)anchors;

  // First pass: per-scale sums and contributor counts. The gate reads the
  // *predicted* objectness and is treated as a constant in the gradient.
  std::array<double, kNumScales> sums{};
  std::array<int, kNumScales> counts{};
  for (const Match& m : matches) {
    const double* l = raw.at(m.scale, m.cell, m.anchor);
    if (sigmoid(l[kFieldObj]) <= tau) continue;
    const double ohat = sigmoid(l[kFieldOri]);
    const double dw = wrap_dist(ohat, m.target.orientation_unit);
    sums[m.scale] += options.distance == OrientationDistance::kSquared ? dw * dw : dw;
    counts[m.scale] += 1;
  }

  double value = 0.0;
  std::array<double, kNumScales> scale_factor{};  // dL/d(per-match contribution)
  if (options.reduction == OrientationReduction::kRawSum) {
    for (int s = 0; s < kNumScales; ++s) {
      value += sums[s];
      scale_factor[s] = 1.0;
    }
  } else {
    int live = 0;
    for (int s = 0; s < kNumScales; ++s) {
      if (counts[s] > 0) ++live;
    }
    if (live > 0) {
      for (int s = 0; s < kNumScales; ++s) {
        if (counts[s] == 0) continue;
        value += sums[s] / counts[s];
        scale_factor[s] = 1.0 / (double(live) * counts[s]);
      }
      value /= live;
    }
  }

  if (grad != nullptr) {
    for (const Match& m : matches) {
      const double* l = raw.at(m.scale, m.cell, m.anchor);
      if (sigmoid(l[kFieldObj]) <= tau) continue;
      const double ohat = sigmoid(l[kFieldOri]);
      const double d = ohat - m.target.orientation_unit;
      const double a = std::fabs(d);
      const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      // d(dw)/d(ohat): +sgn on the direct branch, -sgn past the wrap point.
      const double ddw_dohat = a <= 0.5 ? sgn : -sgn;
      const double dw = a <= 0.5 ? a : 1.0 - a;
      const double drho = options.distance == OrientationDistance::kSquared ? 2.0 * dw : 1.0;
      const double dohat_dt = ohat * (1.0 - ohat);
      grad->at(m.scale, m.cell, m.anchor)[kFieldOri] +=
          weight * scale_factor[m.scale] * drho * ddw_dohat * dohat_dt;
    }
  }
  return value;
}

int orientation_contributors(const RawPrediction& raw, const std::vector<Match>& matches,
                             double tau) {
  int n = 0;
  for (const Match& m : matches) {
    if (sigmoid(raw.at(m.scale, m.cell, m.anchor)[kFieldObj]) > tau) ++n;
  }
  return n;
}

double objectness_loss(const RawPrediction& raw, const std::vector<Match>& matches,
                       const GridSpec& grid, const AnchorSet& anchors,
                       const LossOptions& options, double weight, RawPrediction* grad) {
  check_shape(raw, grid, "objectness_loss");

  // Positive-channel lookup per scale: channel offset / 7 -> match index.
  std::array<std::vector<int>, kNumScales> positive;
  for (int s = 0; s < kNumScales; ++s) {
    positive[s].assign(raw.values[s].size() / kNumFields, -1);
  }
  for (int i = 0; i < int(matches.size()); ++i) {
    const Match& m = matches[i];
    positive[m.scale][raw.offset(m.scale, m.cell, m.anchor) / kNumFields] = i;
  }

  double value = 0.0;
  for (int s = 0; s < kNumScales; ++s) {
    const std::size_t n_channels = raw.values[s].size() / kNumFields;
    const double per = weight / (double(kNumScales) * double(n_channels));
    double scale_sum = 0.0;
    for (std::size_t ch = 0; ch < n_channels; ++ch) {
      const double* l = raw.values[s].data() + ch * kNumFields;
      const double t_obj = l[kFieldObj];
      const int mi = positive[s][ch];

      double target = 0.0;
      BoxGrad bg;
      BoxChain chain{};
      bool target_grad = false;
      if (mi >= 0) {
        const Match& m = matches[mi];
        chain = decode_box_chain(l, grid, s, m.cell, anchors.at(s, m.anchor));
        bg = options.objectness_target == ObjectnessTarget::kCiou
                 ? ciou_with_grad(chain.box, m.target.box)
                 : iou_with_grad(chain.box, m.target.box);
        target = std::clamp(bg.value, 0.0, 1.0);
        target_grad = bg.value > 0.0 && bg.value < 1.0;
      }

      // BCE(sigma(t), target) = softplus(t) - target*t, in logit space.
      scale_sum += softplus(t_obj) - target * t_obj;

      if (grad != nullptr) {
        double* g = grad->values[s].data() + ch * kNumFields;
        g[kFieldObj] += per * (sigmoid(t_obj) - target);
        if (target_grad) {
          // d(BCE)/d(target) = -t; the target follows the decoded box.
          const double dt = per * -t_obj;
          g[kFieldX] += dt * bg.d_cx * chain.dcx_dtx;
          g[kFieldY] += dt * bg.d_cy * chain.dcy_dty;
          g[kFieldW] += dt * bg.d_w * chain.dw_dtw;
          g[kFieldH] += dt * bg.d_h * chain.dh_dth;
        }
      }
    }
    value += scale_sum / double(n_channels);
  }
  return value / double(kNumScales);
}

double box_loss(const RawPrediction& raw, const std::vector<Match>& matches, const GridSpec& grid,
                const AnchorSet& anchors, double weight, RawPrediction* grad) {
  check_shape(raw, grid, "box_loss");

  std::array<double, kNumScales> sums{};
  std::array<int, kNumScales> counts{};
  std::vector<BoxGrad> grads(matches.size());
  std::vector<BoxChain> chains(matches.size());
  for (int i = 0; i < int(matches.size()); ++i) {
    const Match& m = matches[i];
    chains[i] = decode_box_chain(raw.at(m.scale, m.cell, m.anchor), grid, m.scale, m.cell,
                                 anchors.at(m.scale, m.anchor));
    grads[i] = ciou_with_grad(chains[i].box, m.target.box);
    sums[m.scale] += 1.0 - grads[i].value;
    counts[m.scale] += 1;
  }

  int live = 0;
  for (int s = 0; s < kNumScales; ++s) {
    if (counts[s] > 0) ++live;
  }
  if (live == 0) return 0.0;

  double value = 0.0;
  for (int s = 0; s < kNumScales; ++s) {
    if (counts[s] > 0) value += sums[s] / counts[s];
  }
  value /= live;

  if (grad != nullptr) {
    for (int i = 0; i < int(matches.size()); ++i) {
      const Match& m = matches[i];
      const double f = -weight / (double(live) * counts[m.scale]);
      double* g = grad->at(m.scale, m.cell, m.anchor);
      g[kFieldX] += f * grads[i].d_cx * chains[i].dcx_dtx;
      g[kFieldY] += f * grads[i].d_cy * chains[i].dcy_dty;
      g[kFieldW] += f * grads[i].d_w * chains[i].dw_dtw;
      g[kFieldH] += f * grads[i].d_h * chains[i].dh_dth;
    }
  }
  return value;
}

LossBreakdown compute_losses(const RawPrediction& raw, const std::vector<Match>& matches,
                             const GridSpec& grid, const AnchorSet& anchors,
                             const LossWeights& weights, const LossOptions& options) {
  validate_weights(weights);
  LossBreakdown out(grid);
  out.objectness =
      objectness_loss(raw, matches, grid, anchors, options, weights.alpha, &out.gradient);
  out.box = box_loss(raw, matches, grid, anchors, weights.beta, &out.gradient);
  out.orientation = orientation_loss(raw, matches, grid, anchors, weights.tau, options,
                                     weights.lambda, &out.gradient);
  out.total =
      weights.alpha * out.objectness + weights.beta * out.box + weights.lambda * out.orientation;
  return out;
}

LossBreakdown total_loss(const RawPrediction& raw, const std::vector<AnnotatedInstance>& gts,
                         const GridSpec& grid, const AnchorSet& anchors,
                         const LossWeights& weights, const LossOptions& options) {
  const AssignResult assigned = assign(gts, grid, anchors);
  return compute_losses(raw, assigned.matches, grid, anchors, weights, options);
}

}  // namespace orientdet
