#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orientdet/instance.hpp"
#include "orientdet/postprocess.hpp"

namespace orientdet {

// Detections and ground truth for one image, both in the same pixel frame.
struct ImageEval {
  std::vector<Detection> preds;
  std::vector<AnnotatedInstance> gts;
};

// Keyed by image id; iteration order (and therefore every reduction below)
// is sorted by id, so callers can insert images in any order.
using EvalSet = std::map<std::int64_t, ImageEval>;

struct MatchedPair {
  int pred = 0;  // indices into the input vectors
  int gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_gts;
};

// Greedy matching: walk predictions by descending score (ties: earlier input
// index) and let each claim the unclaimed GT with highest IoU >= threshold
// (ties: lowest GT index). At most one prediction per GT.
MatchResult match_detections(const std::vector<Detection>& preds,
                             const std::vector<AnnotatedInstance>& gts, double iou_threshold);

inline constexpr std::array<double, 5> kAccThresholdsDeg{5.0, 15.0, 22.5, 30.0, 45.0};

struct OrientationMetrics {
  double mae_deg = 0.0;
  std::array<double, 5> acc{};  // fraction of pairs with error <= kAccThresholdsDeg[i]
};

// Aggregates wrapped angular errors (degrees). Empty input -> absent.
std::optional<OrientationMetrics> orientation_metrics(const std::vector<double>& errors_deg);

// 101-point interpolated average precision at one IoU threshold, pooled over
// all images (predictions ranked globally by score, matched within their own
// image). Absent when the set has no GT boxes.
std::optional<double> average_precision(const EvalSet& set, double iou_threshold);

// Mean AP over IoU thresholds 0.50:0.05:0.95.
std::optional<double> ap_coco(const EvalSet& set);

// Fraction of GT boxes claimed by a prediction with score >= conf at the
// given IoU threshold. Absent when the set has no GT boxes.
std::optional<double> recall_at(const EvalSet& set, double iou_threshold, double conf);

struct EvalOptions {
  double match_iou = 0.5;     // used for pair matching and recall
  double conf = 0.0;          // score floor for pair matching and recall (AP ranks everything)
  bool exclude_weak = false;  // drop weak-labeled GTs before computing anything
};

struct EvalReport {
  std::optional<OrientationMetrics> orientation;
  std::optional<double> ap50;
  std::optional<double> ap50_95;
  std::optional<double> recall;
  std::int64_t gt_count = 0;
  std::int64_t pred_count = 0;
  std::int64_t matched_count = 0;
};

EvalReport evaluate(const EvalSet& set, const EvalOptions& options = {});

// Aligned single-value-row table; absent metrics render as ---.
std::string format_report_table(const EvalReport& report);

}  // namespace orientdet
