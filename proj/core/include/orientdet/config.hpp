#pragma once

#include <stdexcept>
#include <string>

#include "orientdet/embedding.hpp"
#include "orientdet/losses.hpp"
#include "orientdet/postprocess.hpp"
#include "orientdet/toytrain.hpp"

namespace orientdet {

// Configuration problems (unparseable file, unknown key, bad value) are a
// different failure class from bad data; the CLI maps them to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The reference-scale anchor family for a 1024x1024 input frame.
AnchorSet reference_anchor_set();

// Everything the evaluate/nms/plot commands need besides their input files.
struct PipelineConfig {
  GridSpec grid;
  AnchorSet anchors;
  LossWeights weights;
  LossOptions loss_options;
  double conf_threshold = 0.25;
  double nms_iou = 0.45;
  ScoreMode score_mode = ScoreMode::kObjectness;
  // Plot convention: with both flags set (the default), 0 degrees points up
  // on screen and angles grow clockwise.
  bool plot_zero_up = true;
  bool plot_clockwise = true;

  PipelineConfig();  // reference-scale defaults (1024x1024 frame)
};

// Strict JSON loaders: unknown keys are rejected by name, values are
// validated, and anything missing falls back to the defaults above (or, for
// the train section, to TrainConfig's desk-scale defaults).
PipelineConfig load_pipeline_config(const std::string& path);
TrainConfig load_train_config(const std::string& path);

}  // namespace orientdet
