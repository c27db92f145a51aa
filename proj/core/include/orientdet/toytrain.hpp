#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "orientdet/assignment.hpp"
#include "orientdet/embedding.hpp"
#include "orientdet/instance.hpp"
#include "orientdet/losses.hpp"
#include "orientdet/metrics.hpp"

namespace orientdet {

inline constexpr int kFeatureDim = 32;
inline constexpr int kSignalDim = kNumAnchors * kNumFields;  // 21

// Logit clamp applied when planting target codes into scene features; keeps
// the objectness column bounded so full-batch descent on the shared lever
// does not limit-cycle. sigma(3) = 0.95, decode error sub-pixel.
inline constexpr double kPlantLogitClamp = 3.0;

// Fixed seed-derived projection R^21 -> R^32 with orthogonal columns, the
// stand-in for a feature extractor. Column block [7a, 7a+7) carries anchor
// a's target logits. Columns are orthogonal but not unit-norm (per-field
// gains; see make_projection), so the ideal linear readout is exact:
// row (a, f) of the ideal head is column 7a+f divided by its squared norm.
struct Projection {
  std::vector<double> values;  // kFeatureDim x kSignalDim, row-major

  double at(int row, int col) const { return values[std::size_t(row) * kSignalDim + col]; }
};

Projection make_projection(std::uint64_t seed);

// Scene-generator sampling ranges. Heights and aspect ratios (w/h) are drawn
// log-uniform — person boxes cluster around upright aspects, which also keeps
// every draw near some anchor shape — centers uniform with the box kept
// inside the frame, orientations uniform.
//
// The default size band keeps every draw on the finest scale (see
// desk_anchor_set). Positives on the few-channel coarse scales destabilize
// plain gradient descent: the objectness target is the live CIoU, so a badly
// localized positive on a 12-channel scale pushes box logits away from the
// ground truth with far more weight than the box loss pulls back, and the
// shared readout deadlocks near zero overlap. Keeping coarse scales
// all-negative sidesteps that trap while they still train suppression.
//
// The lower box edge stays a few pixels wide: IoU sensitivity to a center
// shift grows as 1/w, so near-degenerate slivers concentrate the loss
// curvature and set the step-size ceiling for everyone else.
struct SceneRanges {
  int min_persons = 1;
  int max_persons = 3;
  double min_h = 10.0;
  double max_h = 24.0;
  double min_aspect = 0.4;
  double max_aspect = 1.2;
  double max_pair_iou = 0.3;  // denser scenes are redrawn
};

// Per-scale dense feature maps, kFeatureDim channels per cell, row-major by
// (row, col).
struct FeatureGrid {
  std::array<std::vector<double>, kNumScales> values;

  static FeatureGrid zeros(const GridSpec& grid);
  double* cell(const GridSpec& grid, int scale, CellIndex c) {
    return values[scale].data() +
           (std::size_t(c.y) * grid.grid_w(scale) + c.x) * kFeatureDim;
  }
  const double* cell(const GridSpec& grid, int scale, CellIndex c) const {
    return values[scale].data() +
           (std::size_t(c.y) * grid.grid_w(scale) + c.x) * kFeatureDim;
  }
};

struct SyntheticScene {
  std::int64_t image_id = 0;
  std::vector<AnnotatedInstance> gts;
  AssignResult assignment;
  FeatureGrid features;
};

// Deterministic scene synthesis: draw boxes/orientations, assign them, then
// emit per-cell features = P * (stacked per-anchor target logits) + sigma *
// N(0, 1). Unmatched anchor slots contribute zero signal, so cells touching
// no match carry pure noise. Scenes where a GT ends up unassigned or two
// boxes overlap beyond ranges.max_pair_iou are redrawn from a derived seed
// (bounded attempts; throws if the ranges make acceptance hopeless).
SyntheticScene gen_scene(std::uint64_t seed, std::int64_t image_id, const GridSpec& grid,
                         const AnchorSet& anchors, const SceneRanges& ranges, double noise_sigma,
                         const Projection& projection);

// One weight matrix per anchor plus a per-field bias, shared across cells
// and scales. Weights start at zero; train() seeds the objectness biases
// from TrainConfig::obj_bias_init. Storage is field-major (each field's
// weight row over the 32 features is contiguous) so the objectness-only
// training fast path streams memory.
struct LinearHead {
  std::array<std::vector<double>, kNumAnchors> weights;  // kNumFields * kFeatureDim each
  std::array<std::array<double, kNumFields>, kNumAnchors> bias{};

  LinearHead();
  double weight(int anchor, int field, int feature) const {
    return weights[anchor][std::size_t(field) * kFeatureDim + feature];
  }
};

// Apply the head to every cell. With sparse_matches set, only the objectness
// logit is computed off the matched channels (the losses read nothing else
// there); pass null for the full decode used at evaluation time.
RawPrediction head_forward(const LinearHead& head, const FeatureGrid& features,
                           const GridSpec& grid, const std::vector<Match>* sparse_matches);

// Accumulate d(loss)/d(head params) given d(loss)/d(logits), visiting exactly
// the entries head_forward wrote under the same sparse_matches.
void head_backward(const RawPrediction& logit_grad, const FeatureGrid& features,
                   const GridSpec& grid, const std::vector<Match>* sparse_matches,
                   LinearHead& grad);

// The desk-scale anchor family for a 192x192 frame. The finest scale tiles
// the default SceneRanges size band; the coarse scales carry whole-frame
// priors that no default draw can claim (see the definition for why).
AnchorSet desk_anchor_set();

struct TrainConfig {
  std::uint64_t seed = 42;
  int steps = 2000;
  double learning_rate = 0.1;  // tuned against the default run; see notes below
  int batch_size = 0;          // 0 = full batch
  // Objectness bias at step 0. Almost every channel is a negative, so
  // starting the objectness prior low skips part of the global-suppression
  // phase, while sigma(-0.5) = 0.38 still clears the default tau gate: the
  // orientation term is live from the first step and descends with everything
  // else instead of bumping the curve when contributors trickle in later.
  double obj_bias_init = -0.5;
  double noise_sigma = 0.05;
  int train_scenes = 200;
  int heldout_scenes = 50;
  GridSpec grid;
  AnchorSet anchors;
  LossWeights weights;
  LossOptions loss_options;
  SceneRanges ranges;
  // Held-out evaluation. The trained objectness head is sharply bimodal --
  // backgrounds sit below 0.05, true detections spread upward from ~0.1 --
  // so a low confidence cut keeps every real detection and NMS absorbs the
  // duplicates.
  double eval_conf = 0.10;      // confidence filter ...
  double eval_nms_iou = 0.45;   // ... NMS threshold ...
  double eval_match_iou = 0.5;  // ... and matching threshold

  TrainConfig();  // desk-scale defaults: 192x192 frame, scaled-down anchors
};

void validate_train_config(const TrainConfig& config);

// One history row per step: losses over the step's batch plus the gate's
// live contributor count.
struct StepRecord {
  int step = 0;
  double objectness = 0.0;
  double box = 0.0;
  double orientation = 0.0;
  double total = 0.0;
  int orientation_contributors = 0;
};

struct TrainResult {
  LinearHead head;
  std::vector<StepRecord> history;
};

std::vector<SyntheticScene> make_train_scenes(const TrainConfig& config);
std::vector<SyntheticScene> make_heldout_scenes(const TrainConfig& config);

// Plain full-batch (or sequential mini-batch) gradient descent, bitwise
// deterministic under a fixed seed. Non-finite loss aborts with the
// offending step index in the error message.
TrainResult train(const TrainConfig& config);
TrainResult train(const TrainConfig& config, const std::vector<SyntheticScene>& scenes);

// Forward + filter + NMS per scene; metric reductions happen in the metrics
// module on the returned set, never here.
EvalSet evaluate_head(const LinearHead& head, const std::vector<SyntheticScene>& scenes,
                      const GridSpec& grid, const AnchorSet& anchors, double conf_threshold,
                      double nms_iou_threshold);

// Structured-text history log and head parameter file. Both round-trip
// exactly and are byte-stable for fixed content.
void write_history_file(const std::string& path, const std::vector<StepRecord>& history);
std::vector<StepRecord> read_history_file(const std::string& path);
void write_head_file(const std::string& path, const LinearHead& head);
LinearHead read_head_file(const std::string& path);

// Window-mean smoothing for the monotonicity check on training curves.
std::vector<double> smoothed(const std::vector<double>& xs, int window);

// --- finite-difference gradient checking ---

// Loss under test: fills grad (same shape as the point) and returns value.
using LossFn = std::function<double(const RawPrediction&, RawPrediction*)>;

struct GradcheckReport {
  double max_rel_error = 0.0;
  int scale = -1;          // worst coordinate's scale, -1 when no coords
  std::size_t coord = 0;   // flat index within that scale
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences at every coordinate: rel error = |analytic - fd| /
// max(1e-8, |fd|). The point must sit away from the loss's non-smooth loci
// (see smoothness_margin); the checker itself is oblivious to them.
GradcheckReport gradcheck(const LossFn& fn, const RawPrediction& point, double eps = 1e-5);

// Distance of a raw point from the non-smooth loci of the full loss stack,
// normalized so that a margin >= 1 guarantees an eps-sized logit probe can't
// straddle any branch: wrapped-distance kinks (d = 0, |d| = 0.5), the tau
// gate, the objectness-target clamp (CIoU at 0 or 1), IoU corner ties and
// the zero-overlap boundary. Points below 1 should be redrawn, mirroring
// the published exclusion of points within 1e-6 of a locus.
double smoothness_margin(const RawPrediction& raw, const std::vector<Match>& matches,
                         const GridSpec& grid, const AnchorSet& anchors, double tau,
                         double eps = 1e-5);

// A random-but-smooth gradcheck problem: a small assignable scene on a 64x64
// frame plus uniformly drawn logits, redrawn from derived seeds until the
// point clears smoothness_margin.
struct GradcheckInstance {
  GridSpec grid;
  AnchorSet anchors;
  std::vector<AnnotatedInstance> gts;
  AssignResult assignment;
  RawPrediction point;
};

GradcheckInstance make_gradcheck_instance(std::uint64_t seed, double tau = 0.2, double eps = 1e-5);

}  // namespace orientdet
