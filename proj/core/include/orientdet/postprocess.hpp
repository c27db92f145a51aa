#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "orientdet/embedding.hpp"
#include "orientdet/geometry.hpp"

namespace orientdet {

// One final detection. The box frame is whatever the caller put the grid in;
// postprocess itself never rescales (un-letterboxing is a dataset transform).
struct Detection {
  Box2D box;
  double score = 0.0;                // in (0, 1)
  double orientation_degrees = 0.0;  // [0, 360)
};

enum class ScoreMode {
  kObjectness,           // score = p
  kObjectnessTimesClass  // score = p * c
};

// Decode every channel and keep score > threshold, scanning scales in order
// and cells row-major so the output order is reproducible.
std::vector<Detection> confidence_filter(const RawPrediction& raw, const GridSpec& grid,
                                         const AnchorSet& anchors, double conf_threshold,
                                         ScoreMode mode = ScoreMode::kObjectness);

// Greedy NMS: repeatedly keep the highest-scoring remaining detection (ties:
// earlier input index) and drop every remaining one with IoU strictly above
// the threshold. Orientation rides along untouched.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

// Prediction interchange file: '#'-prefixed header, then one line per
// detection: image_id x1 y1 x2 y2 score orientation_deg, floats printed with
// six decimals. Reading rejects malformed lines with their line number.
struct PredictionRecord {
  std::int64_t image_id = 0;
  Detection det;
};

void write_predictions(std::ostream& os, const std::vector<PredictionRecord>& records);
void write_predictions_file(const std::string& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(std::istream& is);
std::vector<PredictionRecord> read_predictions_file(const std::string& path);

}  // namespace orientdet
