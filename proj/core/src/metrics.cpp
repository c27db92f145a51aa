#include "orientdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "orientdet/angles.hpp"
#include "orientdet/geometry.hpp"

namespace orientdet {

MatchResult match_detections(const std::vector<Detection>& preds,
                             const std::vector<AnnotatedInstance>& gts, double iou_threshold) {
  if (!(iou_threshold > 0.0) || !(iou_threshold <= 1.0)) {
    throw std::invalid_argument("match_detections: iou threshold must lie in (0, 1]");
  }
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return preds[a].score > preds[b].score; });

  MatchResult r;
  std::vector<bool> claimed(gts.size(), false);
  for (int pi : order) {
    int best = -1;
    double best_iou = 0.0;
    for (int gi = 0; gi < int(gts.size()); ++gi) {
      if (claimed[gi]) continue;
      const double v = iou(preds[pi].box, gts[gi].box);
      if (v >= iou_threshold && v > best_iou) {
        best = gi;
        best_iou = v;
      }
    }
    if (best >= 0) {
      claimed[best] = true;
      r.pairs.push_back({pi, best, best_iou});
    } else {
      r.unmatched_preds.push_back(pi);
    }
  }
  for (int gi = 0; gi < int(gts.size()); ++gi) {
    if (!claimed[gi]) r.unmatched_gts.push_back(gi);
  }
  std::sort(r.unmatched_preds.begin(), r.unmatched_preds.end());
  return r;
}

std::optional<OrientationMetrics> orientation_metrics(const std::vector<double>& errors_deg) {
  if (errors_deg.empty()) return std::nullopt;
  OrientationMetrics m;
  for (double e : errors_deg) {
    if (!(e >= 0.0) || !(e <= 180.0)) {
      throw std::invalid_argument("orientation_metrics: error outside [0, 180]");
    }
    m.mae_deg += e;
    for (std::size_t i = 0; i < kAccThresholdsDeg.size(); ++i) {
      if (e <= kAccThresholdsDeg[i]) m.acc[i] += 1.0;
    }
  }
  m.mae_deg /= double(errors_deg.size());
  for (double& a : m.acc) a /= double(errors_deg.size());
  return m;
}

namespace {

std::int64_t count_gts(const EvalSet& set) {
  std::int64_t n = 0;
  for (const auto& [id, img] : set) n += std::int64_t(img.gts.size());
  return n;
}

}  // namespace

std::optional<double> average_precision(const EvalSet& set, double iou_threshold) {
  const std::int64_t total_gt = count_gts(set);
  if (total_gt == 0) return std::nullopt;

  // Global rank: score descending, ties broken by (image id, input index) so
  // the result cannot depend on insertion or shuffle order.
  struct Ranked {
    double score;
    std::int64_t image_id;
    int index;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, img] : set) {
    for (int i = 0; i < int(img.preds.size()); ++i) ranked.push_back({img.preds[i].score, id, i});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return a.index < b.index;
  });

  std::map<std::int64_t, std::vector<bool>> claimed;
  for (const auto& [id, img] : set) claimed[id].assign(img.gts.size(), false);

  std::vector<double> recall(ranked.size()), precision(ranked.size());
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const ImageEval& img = set.at(ranked[k].image_id);
    const Detection& pred = img.preds[ranked[k].index];
    std::vector<bool>& taken = claimed[ranked[k].image_id];
    int best = -1;
    double best_iou = 0.0;
    for (int gi = 0; gi < int(img.gts.size()); ++gi) {
      if (taken[gi]) continue;
      const double v = iou(pred.box, img.gts[gi].box);
      if (v >= iou_threshold && v > best_iou) {
        best = gi;
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall[k] = double(tp) / double(total_gt);
    precision[k] = double(tp) / double(tp + fp);
  }

  // Precision envelope (running max from the right), sampled at 101 recall
  // points; recall levels beyond the curve contribute zero.
  for (std::size_t k = ranked.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = double(i) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) ap += precision[std::size_t(it - recall.begin())];
  }
  return ap / 101.0;
}

std::optional<double> ap_coco(const EvalSet& set) {
  if (count_gts(set) == 0) return std::nullopt;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 10; ++i) {
    const double thr = 0.5 + 0.05 * i;
    sum += average_precision(set, thr).value();
    ++n;
  }
  return sum / n;
}

std::optional<double> recall_at(const EvalSet& set, double iou_threshold, double conf) {
  const std::int64_t total_gt = count_gts(set);
  if (total_gt == 0) return std::nullopt;
  std::int64_t matched = 0;
  for (const auto& [id, img] : set) {
    std::vector<Detection> kept;
    for (const Detection& d : img.preds) {
      if (d.score >= conf) kept.push_back(d);
    }
    matched += std::int64_t(match_detections(kept, img.gts, iou_threshold).pairs.size());
  }
  return double(matched) / double(total_gt);
}

EvalReport evaluate(const EvalSet& set, const EvalOptions& options) {
  EvalSet work = set;
  if (options.exclude_weak) {
    for (auto& [id, img] : work) {
      std::vector<AnnotatedInstance> strong;
      for (const AnnotatedInstance& g : img.gts) {
        if (!g.weak) strong.push_back(g);
      }
      img.gts = std::move(strong);
    }
  }

  EvalReport rep;
  std::vector<double> errors;
  for (const auto& [id, img] : work) {
    rep.gt_count += std::int64_t(img.gts.size());
    rep.pred_count += std::int64_t(img.preds.size());

    std::vector<Detection> kept;
    for (const Detection& d : img.preds) {
      if (d.score >= options.conf) kept.push_back(d);
    }
    const MatchResult mr = match_detections(kept, img.gts, options.match_iou);
    rep.matched_count += std::int64_t(mr.pairs.size());
    for (const MatchedPair& p : mr.pairs) {
      const AnnotatedInstance& gt = img.gts[p.gt];
      if (!gt.orientation.has_value()) {
        throw std::runtime_error("evaluate: GT " + std::to_string(gt.annotation_id) +
                                 " has no orientation label");
      }
      errors.push_back(
          wrapped_deg_error(kept[p.pred].orientation_degrees, gt.orientation->degrees()));
    }
  }

  rep.orientation = orientation_metrics(errors);
  rep.ap50 = average_precision(work, 0.5);
  rep.ap50_95 = ap_coco(work);
  rep.recall = recall_at(work, options.match_iou, options.conf);
  return rep;
}

namespace {

std::string cell(std::optional<double> v, const char* fmt) {
  if (!v.has_value()) return "---";
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

}  // namespace

std::string format_report_table(const EvalReport& r) {
  std::ostringstream os;
  const auto& o = r.orientation;
  char line[256];
  std::snprintf(line, sizeof line, "%10s %8s %8s %8s %8s %8s %8s %9s %8s\n", "MAE", "Acc-5",
                "Acc-15", "Acc-22.5", "Acc-30", "Acc-45", "AP@.5", "AP@.5:.95", "Recall");
  os << line;
  std::snprintf(
      line, sizeof line, "%10s %8s %8s %8s %8s %8s %8s %9s %8s\n",
      cell(o ? std::optional<double>(o->mae_deg) : std::nullopt, "%.3f").c_str(),
      cell(o ? std::optional<double>(o->acc[0]) : std::nullopt, "%.3f").c_str(),
      cell(o ? std::optional<double>(o->acc[1]) : std::nullopt, "%.3f").c_str(),
      cell(o ? std::optional<double>(o->acc[2]) : std::nullopt, "%.3f").c_str(),
      cell(o ? std::optional<double>(o->acc[3]) : std::nullopt, "%.3f").c_str(),
      cell(o ? std::optional<double>(o->acc[4]) : std::nullopt, "%.3f").c_str(),
      cell(r.ap50, "%.3f").c_str(), cell(r.ap50_95, "%.3f").c_str(),
      cell(r.recall, "%.3f").c_str());
  os << line;
  std::snprintf(line, sizeof line, "counts: gt=%lld preds=%lld matched=%lld\n",
                static_cast<long long>(r.gt_count), static_cast<long long>(r.pred_count),
                static_cast<long long>(r.matched_count));
  os << line;
  return os.str();
}

}  // namespace orientdet
