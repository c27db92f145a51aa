#pragma once

#include <vector>

#include "orientdet/assignment.hpp"
#include "orientdet/embedding.hpp"

namespace orientdet {

// Combination weights: total = alpha*objectness + beta*box + lambda*orientation.
// tau is the predicted-objectness gate for the orientation term.
struct LossWeights {
  double alpha = 0.7;
  double beta = 0.05;
  double lambda = 0.05;
  double tau = 0.2;
};

void validate_weights(const LossWeights& w);

enum class OrientationDistance { kSquared, kAbsolute };
enum class OrientationReduction { kScaleMean, kRawSum };
enum class ObjectnessTarget { kCiou, kIou };

struct LossOptions {
  OrientationDistance distance = OrientationDistance::kSquared;
  OrientationReduction reduction = OrientationReduction::kScaleMean;
  ObjectnessTarget objectness_target = ObjectnessTarget::kCiou;
};

// Every loss below returns its value and, when grad is non-null, adds
// weight * dL/d(logit) into grad (same tensor shape as raw). Gradients are
// exact derivatives of the computed value: the objectness target (clamped
// CIoU of the decoded box) is differentiated through the box logits, while
// the tau gate and the contributor counts are piecewise constant and
// contribute nothing.

// Wrapped orientation error over gated matches. Per-scale mean over
// contributing matches, then mean over scales that have contributors
// (raw-sum reduction skips all normalization). Squared distance by default.
double orientation_loss(const RawPrediction& raw, const std::vector<Match>& matches,
                        const GridSpec& grid, const AnchorSet& anchors, double tau,
                        const LossOptions& options, double weight = 1.0,
                        RawPrediction* grad = nullptr);

// Count of matches passing the tau gate (diagnostics / history).
int orientation_contributors(const RawPrediction& raw, const std::vector<Match>& matches,
                             double tau);

// BCE over every channel at every scale; positives target clamp(CIoU, 0, 1)
// of their decoded box against their GT, negatives target 0. Per-scale mean
// over all channels, then mean over the four scales.
double objectness_loss(const RawPrediction& raw, const std::vector<Match>& matches,
                       const GridSpec& grid, const AnchorSet& anchors,
                       const LossOptions& options, double weight = 1.0,
                       RawPrediction* grad = nullptr);

// Mean (1 - CIoU) over matches: per-scale mean, then mean over scales that
// have matches. No objectness gate.
double box_loss(const RawPrediction& raw, const std::vector<Match>& matches,
                const GridSpec& grid, const AnchorSet& anchors, double weight = 1.0,
                RawPrediction* grad = nullptr);

struct LossBreakdown {
  double objectness = 0.0;
  double box = 0.0;
  double orientation = 0.0;
  double total = 0.0;
  RawPrediction gradient;  // d(total)/d(logits)

  explicit LossBreakdown(const GridSpec& grid) : gradient(grid) {}
};

// The three terms over precomputed matches, combined with the weights.
LossBreakdown compute_losses(const RawPrediction& raw, const std::vector<Match>& matches,
                             const GridSpec& grid, const AnchorSet& anchors,
                             const LossWeights& weights, const LossOptions& options);

// Full pipeline: assign, then compute_losses.
LossBreakdown total_loss(const RawPrediction& raw, const std::vector<AnnotatedInstance>& gts,
                         const GridSpec& grid, const AnchorSet& anchors,
                         const LossWeights& weights, const LossOptions& options);

}  // namespace orientdet
