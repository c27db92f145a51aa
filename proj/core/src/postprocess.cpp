#include "orientdet/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace orientdet {

std::vector<Detection> confidence_filter(const RawPrediction& raw, const GridSpec& grid,
                                         const AnchorSet& anchors, double conf_threshold,
                                         ScoreMode mode) {
  if (!(conf_threshold >= 0.0) || conf_threshold >= 1.0) {
    throw std::invalid_argument("confidence_filter: threshold must lie in [0, 1)");
  }
  std::vector<Detection> out;
  for (int s = 0; s < kNumScales; ++s) {
    for (int y = 0; y < grid.grid_h(s); ++y) {
      for (int x = 0; x < grid.grid_w(s); ++x) {
        for (int a = 0; a < kNumAnchors; ++a) {
          const UnifiedEmbedding e = decode(raw, grid, anchors, s, {x, y}, a);
          const double score = mode == ScoreMode::kObjectness
                                   ? e.objectness
                                   : e.objectness * e.class_score;
          if (score > conf_threshold) {
            out.push_back({e.box, score, e.orientation_degrees()});
          }
        }
      }
    }
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  if (!(iou_threshold >= 0.0) || !(iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms: iou threshold must lie in [0, 1]");
  }
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dets[a].score > dets[b].score; });

  std::vector<bool> dropped(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (dropped[order[i]]) continue;
    const Detection& top = dets[order[i]];
    kept.push_back(top);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!dropped[order[j]] && iou(top.box, dets[order[j]].box) > iou_threshold) {
        dropped[order[j]] = true;
      }
    }
  }
  return kept;
}

void write_predictions(std::ostream& os, const std::vector<PredictionRecord>& records) {
  os << "# image_id x1 y1 x2 y2 score orientation_deg\n";
  char line[256];
  for (const PredictionRecord& r : records) {
    const Corners c = to_corners(r.det.box);
    // Orientations a hair under 360 would quantize to "360.000000" and stop
    // round-tripping; fold them to 0 (the same angle) before printing.
    double deg = std::round(r.det.orientation_degrees * 1e6) / 1e6;
    if (deg >= 360.0) deg = 0.0;
    std::snprintf(line, sizeof line, "%lld %.6f %.6f %.6f %.6f %.6f %.6f\n",
                  static_cast<long long>(r.image_id), c.x1, c.y1, c.x2, c.y2, r.det.score, deg);
    os << line;
  }
}

void write_predictions_file(const std::string& path, const std::vector<PredictionRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_predictions(os, records);
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

std::vector<PredictionRecord> read_predictions(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    PredictionRecord r;
    Corners c;
    if (!(ls >> r.image_id >> c.x1 >> c.y1 >> c.x2 >> c.y2 >> r.det.score >>
          r.det.orientation_degrees)) {
      throw std::runtime_error("prediction file: malformed record at line " +
                               std::to_string(line_no));
    }
    std::string extra;
    if (ls >> extra) {
      throw std::runtime_error("prediction file: trailing fields at line " +
                               std::to_string(line_no));
    }
    // Scores live in (0, 1) before quantization, but six-decimal printing can
    // land exactly on either end; accept the closed interval on the way in.
    if (!(r.det.score >= 0.0) || !(r.det.score <= 1.0)) {
      throw std::runtime_error("prediction file: score out of [0, 1] at line " +
                               std::to_string(line_no));
    }
    if (r.det.orientation_degrees < 0.0 || r.det.orientation_degrees >= 360.0) {
      throw std::runtime_error("prediction file: orientation out of [0, 360) at line " +
                               std::to_string(line_no));
    }
    r.det.box = from_corners(c);
    out.push_back(r);
  }
  return out;
}

std::vector<PredictionRecord> read_predictions_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_predictions(is);
}

}  // namespace orientdet
