#include "orientdet/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

namespace orientdet {
namespace {

using json = nlohmann::json;

json parse_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot open " + path);
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path + ": parse error at byte " + std::to_string(e.byte) +
                      ": " + e.what());
  }
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("config: " + where + "." + key + " must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("config: " + where + "." + key + " must be an integer");
  }
  return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError("config: " + where + "." + key + " must be a boolean");
  return v.get<bool>();
}

GridSpec parse_grid(const json& doc, const GridSpec& fallback) {
  if (!doc.contains("input")) return fallback;
  const json& in = doc.at("input");
  check_keys(in, "input", {"width", "height", "strides"});
  const int w = get_int(in, "width", fallback.input_w, "input");
  const int h = get_int(in, "height", fallback.input_h, "input");
  std::array<int, kNumScales> strides = fallback.strides;
  if (in.contains("strides")) {
    const json& s = in.at("strides");
    if (!s.is_array() || s.size() != kNumScales) {
      throw ConfigError("config: input.strides must be an array of 4 integers");
    }
    for (int i = 0; i < kNumScales; ++i) {
      if (!s[i].is_number_integer()) {
        throw ConfigError("config: input.strides must be an array of 4 integers");
      }
      strides[i] = s[i].get<int>();
    }
  }
  try {
    return GridSpec(w, h, strides);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: input: ") + e.what());
  }
}

AnchorSet parse_anchors(const json& doc, const AnchorSet& fallback) {
  if (!doc.contains("anchors")) return fallback;
  const json& a = doc.at("anchors");
  if (!a.is_array() || a.size() != kNumScales) {
    throw ConfigError("config: anchors must be an array of 4 scales");
  }
  std::array<std::array<AnchorShape, kNumAnchors>, kNumScales> shapes;
  for (int s = 0; s < kNumScales; ++s) {
    const json& row = a[s];
    if (!row.is_array() || row.size() != kNumAnchors) {
      throw ConfigError("config: anchors[" + std::to_string(s) + "] must hold 3 [w, h] pairs");
    }
    for (int i = 0; i < kNumAnchors; ++i) {
      const json& pair = row[i];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        throw ConfigError("config: anchors[" + std::to_string(s) + "][" + std::to_string(i) +
                          "] must be a [w, h] pair");
      }
      shapes[s][i] = AnchorShape{pair[0].get<double>(), pair[1].get<double>()};
    }
  }
  try {
    return AnchorSet(shapes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: anchors: ") + e.what());
  }
}

void parse_loss(const json& doc, LossWeights& weights, LossOptions& options) {
  if (!doc.contains("loss")) return;
  const json& l = doc.at("loss");
  check_keys(l, "loss",
             {"alpha", "beta", "lambda", "tau", "orientation_distance", "orientation_reduction",
              "objectness_target"});
  weights.alpha = get_number(l, "alpha", weights.alpha, "loss");
  weights.beta = get_number(l, "beta", weights.beta, "loss");
  weights.lambda = get_number(l, "lambda", weights.lambda, "loss");
  weights.tau = get_number(l, "tau", weights.tau, "loss");
  try {
    validate_weights(weights);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: loss: ") + e.what());
  }
  if (l.contains("orientation_distance")) {
    const std::string v = l.at("orientation_distance").get<std::string>();
    if (v == "squared") {
      options.distance = OrientationDistance::kSquared;
    } else if (v == "absolute") {
      options.distance = OrientationDistance::kAbsolute;
    } else {
      throw ConfigError("config: loss.orientation_distance must be 'squared' or 'absolute', got '" +
                        v + "'");
    }
  }
  if (l.contains("orientation_reduction")) {
    const std::string v = l.at("orientation_reduction").get<std::string>();
    if (v == "scale_mean") {
      options.reduction = OrientationReduction::kScaleMean;
    } else if (v == "raw_sum") {
      options.reduction = OrientationReduction::kRawSum;
    } else {
      throw ConfigError("config: loss.orientation_reduction must be 'scale_mean' or 'raw_sum', got '" +
                        v + "'");
    }
  }
  if (l.contains("objectness_target")) {
    const std::string v = l.at("objectness_target").get<std::string>();
    if (v == "ciou") {
      options.objectness_target = ObjectnessTarget::kCiou;
    } else if (v == "iou") {
      options.objectness_target = ObjectnessTarget::kIou;
    } else {
      throw ConfigError("config: loss.objectness_target must be 'ciou' or 'iou', got '" + v + "'");
    }
  }
}

}  // namespace

AnchorSet reference_anchor_set() {
  return AnchorSet({{{{{19, 27}, {44, 40}, {38, 94}}},
                     {{{96, 68}, {86, 152}, {180, 137}}},
                     {{{140, 301}, {303, 264}, {238, 646}}},
                     {{{436, 615}, {739, 380}, {925, 792}}}}});
}

PipelineConfig::PipelineConfig() : grid(1024, 1024), anchors(reference_anchor_set()) {}

PipelineConfig load_pipeline_config(const std::string& path) {
  const json doc = parse_config_file(path);
  check_keys(doc, "the top level", {"input", "anchors", "loss", "postprocess", "plot", "train"});

  PipelineConfig out;
  out.grid = parse_grid(doc, out.grid);
  out.anchors = parse_anchors(doc, out.anchors);
  parse_loss(doc, out.weights, out.loss_options);

  if (doc.contains("postprocess")) {
    const json& p = doc.at("postprocess");
    check_keys(p, "postprocess", {"conf_threshold", "nms_iou", "score_mode"});
    out.conf_threshold = get_number(p, "conf_threshold", out.conf_threshold, "postprocess");
    out.nms_iou = get_number(p, "nms_iou", out.nms_iou, "postprocess");
    if (!(out.conf_threshold >= 0.0) || !(out.conf_threshold < 1.0)) {
      throw ConfigError("config: postprocess.conf_threshold must be in [0, 1)");
    }
    if (!(out.nms_iou >= 0.0) || !(out.nms_iou <= 1.0)) {
      throw ConfigError("config: postprocess.nms_iou must be in [0, 1]");
    }
    if (p.contains("score_mode")) {
      const std::string v = p.at("score_mode").get<std::string>();
      if (v == "objectness") {
        out.score_mode = ScoreMode::kObjectness;
      } else if (v == "objectness_times_class") {
        out.score_mode = ScoreMode::kObjectnessTimesClass;
      } else {
        throw ConfigError(
            "config: postprocess.score_mode must be 'objectness' or 'objectness_times_class', got '" +
            v + "'");
      }
    }
  }

  if (doc.contains("plot")) {
    const json& p = doc.at("plot");
    check_keys(p, "plot", {"zero_up", "clockwise"});
    out.plot_zero_up = get_bool(p, "zero_up", out.plot_zero_up, "plot");
    out.plot_clockwise = get_bool(p, "clockwise", out.plot_clockwise, "plot");
  }
  return out;
}

TrainConfig load_train_config(const std::string& path) {
  const json doc = parse_config_file(path);
  check_keys(doc, "the top level", {"input", "anchors", "loss", "postprocess", "plot", "train"});

  TrainConfig out;
  out.grid = parse_grid(doc, out.grid);
  out.anchors = parse_anchors(doc, out.anchors);
  parse_loss(doc, out.weights, out.loss_options);

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    check_keys(t, "train",
               {"seed", "steps", "learning_rate", "batch_size", "noise_sigma", "train_scenes",
                "heldout_scenes", "scene", "eval"});
    if (t.contains("seed")) {
      const json& s = t.at("seed");
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
        throw ConfigError("config: train.seed must be a nonnegative integer");
      }
      out.seed = s.get<std::uint64_t>();
    }
    out.steps = get_int(t, "steps", out.steps, "train");
    out.learning_rate = get_number(t, "learning_rate", out.learning_rate, "train");
    out.batch_size = get_int(t, "batch_size", out.batch_size, "train");
    out.noise_sigma = get_number(t, "noise_sigma", out.noise_sigma, "train");
    out.train_scenes = get_int(t, "train_scenes", out.train_scenes, "train");
    out.heldout_scenes = get_int(t, "heldout_scenes", out.heldout_scenes, "train");

    if (t.contains("scene")) {
      const json& s = t.at("scene");
      check_keys(s, "train.scene",
                 {"min_persons", "max_persons", "min_h", "max_h", "min_aspect", "max_aspect",
                  "max_pair_iou"});
      out.ranges.min_persons = get_int(s, "min_persons", out.ranges.min_persons, "train.scene");
      out.ranges.max_persons = get_int(s, "max_persons", out.ranges.max_persons, "train.scene");
      out.ranges.min_h = get_number(s, "min_h", out.ranges.min_h, "train.scene");
      out.ranges.max_h = get_number(s, "max_h", out.ranges.max_h, "train.scene");
      out.ranges.min_aspect = get_number(s, "min_aspect", out.ranges.min_aspect, "train.scene");
      out.ranges.max_aspect = get_number(s, "max_aspect", out.ranges.max_aspect, "train.scene");
      out.ranges.max_pair_iou =
          get_number(s, "max_pair_iou", out.ranges.max_pair_iou, "train.scene");
    }
    if (t.contains("eval")) {
      const json& e = t.at("eval");
      check_keys(e, "train.eval", {"conf", "nms_iou", "match_iou"});
      out.eval_conf = get_number(e, "conf", out.eval_conf, "train.eval");
      out.eval_nms_iou = get_number(e, "nms_iou", out.eval_nms_iou, "train.eval");
      out.eval_match_iou = get_number(e, "match_iou", out.eval_match_iou, "train.eval");
    }
  }
  try {
    validate_train_config(out);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: train: ") + e.what());
  }
  return out;
}

}  // namespace orientdet
