#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orientdet/config.hpp"
#include "orientdet/dataset.hpp"
#include "orientdet/losses.hpp"
#include "orientdet/metrics.hpp"
#include "orientdet/postprocess.hpp"
#include "orientdet/toytrain.hpp"
#include "svg_plot.hpp"

namespace {

using namespace orientdet;

PipelineConfig pipeline_config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return load_pipeline_config(path);
}

TrainConfig train_config_or_default(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return load_train_config(path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

// Group flat prediction records into per-image buckets, ids ascending.
std::map<std::int64_t, std::vector<Detection>> by_image(
    const std::vector<PredictionRecord>& records) {
  std::map<std::int64_t, std::vector<Detection>> out;
  for (const PredictionRecord& r : records) out[r.image_id].push_back(r.det);
  return out;
}

int cmd_reconstruct(const std::string& persons_path, const std::string& labels_path,
                    const std::string& weak_path, const std::string& out_path,
                    bool permit_missing) {
  const PersonSet persons = load_person_annotations(persons_path);
  if (persons.skipped_unknown_category > 0) {
    std::fprintf(stderr, "warning: %lld annotations with unknown category ids skipped\n",
                 static_cast<long long>(persons.skipped_unknown_category));
  }
  if (persons.excluded_crowd > 0) {
    std::fprintf(stderr, "note: %lld crowd regions excluded\n",
                 static_cast<long long>(persons.excluded_crowd));
  }
  const LabelMap strong = load_orientation_labels(labels_path);
  const LabelMap weak = weak_path.empty() ? LabelMap{} : load_orientation_labels(weak_path);

  ReconstructOptions options;
  options.permit_missing = permit_missing;
  const Reconstructed merged = reconstruct(persons, strong, weak, options);
  write_merged_annotations(out_path, merged);

  const DatasetStats& s = merged.stats;
  std::printf(
      "images=%lld instances=%lld strong=%lld weak=%lld dropped_missing=%lld "
      "skipped_images=%lld skipped_instances=%lld orphan_labels=%lld\n",
      static_cast<long long>(s.images), static_cast<long long>(s.instances),
      static_cast<long long>(s.strong), static_cast<long long>(s.weak),
      static_cast<long long>(s.dropped_missing), static_cast<long long>(s.skipped_images),
      static_cast<long long>(s.skipped_instances), static_cast<long long>(s.orphan_labels));
  return 0;
}

int cmd_convert_labels(const std::string& csv_path, const std::string& out_path) {
  const LabelMap labels = convert_labels_csv(csv_path);
  write_orientation_labels(out_path, labels);
  std::printf("labels=%zu\n", labels.size());
  return 0;
}

int cmd_evaluate(const std::string& preds_path, const std::string& gts_path, double match_iou,
                 double conf, bool exclude_weak) {
  const std::vector<PredictionRecord> records = read_predictions_file(preds_path);
  const PersonSet gts = load_person_annotations(gts_path);

  EvalSet set;
  for (const auto& [image_id, dets] : by_image(records)) set[image_id].preds = dets;
  for (const AnnotatedInstance& gt : gts.persons) set[gt.image_id].gts.push_back(gt);

  EvalOptions options;
  options.match_iou = match_iou;
  options.conf = conf;
  options.exclude_weak = exclude_weak;
  const EvalReport report = evaluate(set, options);
  std::fputs(format_report_table(report).c_str(), stdout);
  return 0;
}

int cmd_nms(const std::string& preds_path, double iou_threshold, const std::string& out_path) {
  const std::vector<PredictionRecord> records = read_predictions_file(preds_path);

  std::vector<PredictionRecord> kept;
  kept.reserve(records.size());
  for (const auto& [image_id, dets] : by_image(records)) {
    for (const Detection& d : nms(dets, iou_threshold)) kept.push_back({image_id, d});
  }

  if (out_path.empty()) {
    std::ostringstream os;
    write_predictions(os, kept);
    std::fputs(os.str().c_str(), stdout);
  } else {
    write_predictions_file(out_path, kept);
    std::fprintf(stderr, "%zu of %zu detections kept -> %s\n", kept.size(), records.size(),
                 out_path.c_str());
  }
  return 0;
}

// The plot command accepts either interchange format; annotation JSON starts
// with '{', the prediction format with '#' or a digit.
bool looks_like_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char c = 0;
  while (is.get(c)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
    return c == '{' || c == '[';
  }
  return false;  // empty file: treat as an empty prediction list
}

int cmd_plot(const std::string& input_path, const std::string& out_path, int width, int height,
             std::optional<std::int64_t> image_id, const PipelineConfig& config) {
  std::vector<tool::PlotInstance> instances;
  if (looks_like_json(input_path)) {
    const PersonSet set = load_person_annotations(input_path);
    for (const AnnotatedInstance& inst : set.persons) {
      if (image_id && inst.image_id != *image_id) continue;
      tool::PlotInstance p;
      p.box = inst.box;
      if (inst.orientation) p.orientation_degrees = inst.orientation->degrees();
      p.weak = inst.weak;
      instances.push_back(p);
    }
  } else {
    for (const PredictionRecord& r : read_predictions_file(input_path)) {
      if (image_id && r.image_id != *image_id) continue;
      instances.push_back({r.det.box, r.det.orientation_degrees, false});
    }
  }

  write_text_file(out_path, tool::render_svg(instances, width, height, config.plot_zero_up,
                                             config.plot_clockwise));
  std::printf("instances=%zu\n", instances.size());
  return 0;
}

int cmd_train_toy(const TrainConfig& config, const std::string& history_path,
                  const std::string& head_path) {
  const TrainResult result = train(config);
  if (!history_path.empty()) write_history_file(history_path, result.history);
  if (!head_path.empty()) write_head_file(head_path, result.head);

  const std::vector<SyntheticScene> heldout = make_heldout_scenes(config);
  const EvalSet set = evaluate_head(result.head, heldout, config.grid, config.anchors,
                                    config.eval_conf, config.eval_nms_iou);
  EvalOptions options;
  options.match_iou = config.eval_match_iou;
  const EvalReport report = evaluate(set, options);

  const StepRecord& last = result.history.back();
  std::fprintf(stderr, "trained %d steps, final total loss %.6f\n", last.step + 1, last.total);
  std::printf("heldout mae_deg=%.3f ap50=%.4f recall=%.4f gts=%lld preds=%lld matched=%lld\n",
              report.orientation ? report.orientation->mae_deg : -1.0,
              report.ap50 ? *report.ap50 : -1.0, report.recall ? *report.recall : -1.0,
              static_cast<long long>(report.gt_count), static_cast<long long>(report.pred_count),
              static_cast<long long>(report.matched_count));
  return 0;
}

int cmd_gradcheck(int seeds, double eps, double tol, double tau) {
  GradcheckReport worst;
  int worst_seed = -1;
  const char* worst_loss = "";
  for (int seed = 0; seed < seeds; ++seed) {
    const GradcheckInstance inst = make_gradcheck_instance(std::uint64_t(seed), tau, eps);
    const std::vector<Match>& matches = inst.assignment.matches;
    LossOptions loss_options;
    LossWeights weights;
    weights.tau = tau;

    const std::pair<const char*, LossFn> fns[] = {
        {"objectness",
         [&](const RawPrediction& raw, RawPrediction* grad) {
           return objectness_loss(raw, matches, inst.grid, inst.anchors, loss_options, 1.0, grad);
         }},
        {"box",
         [&](const RawPrediction& raw, RawPrediction* grad) {
           return box_loss(raw, matches, inst.grid, inst.anchors, 1.0, grad);
         }},
        {"orientation",
         [&](const RawPrediction& raw, RawPrediction* grad) {
           return orientation_loss(raw, matches, inst.grid, inst.anchors, tau, loss_options, 1.0,
                                   grad);
         }},
        {"total",
         [&](const RawPrediction& raw, RawPrediction* grad) {
           const LossBreakdown b =
               compute_losses(raw, matches, inst.grid, inst.anchors, weights, loss_options);
           if (grad) *grad = b.gradient;
           return b.total;
         }},
    };
    for (const auto& [name, fn] : fns) {
      const GradcheckReport report = gradcheck(fn, inst.point, eps);
      if (report.max_rel_error > worst.max_rel_error) {
        worst = report;
        worst_seed = seed;
        worst_loss = name;
      }
    }
  }

  const bool pass = worst.max_rel_error < tol;
  std::printf("seeds=%d max_rel_error=%.3e %s\n", seeds, worst.max_rel_error,
              pass ? "PASS" : "FAIL");
  if (!pass) {
    std::fprintf(stderr, "worst: seed %d, %s loss, scale %d coord %zu: analytic %.9g vs fd %.9g\n",
                 worst_seed, worst_loss, worst.scale, worst.coord, worst.analytic, worst.numeric);
  }
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint person detection and body-orientation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")
      ->envname("ORIENTDET_CONFIG")
      ->check(CLI::ExistingFile);

  // reconstruct
  auto* reconstruct_cmd =
      app.add_subcommand("reconstruct", "merge person boxes with orientation labels");
  std::string persons_path, labels_path, weak_path, merged_out;
  bool permit_missing = false;
  reconstruct_cmd->add_option("persons", persons_path, "detection-benchmark annotation JSON")
      ->required();
  reconstruct_cmd->add_option("labels", labels_path, "orientation label file")->required();
  reconstruct_cmd->add_option("out", merged_out, "merged annotation output")->required();
  reconstruct_cmd->add_option("--weak", weak_path, "weak (restored) label file");
  reconstruct_cmd->add_flag("--permit-missing", permit_missing,
                            "drop uncovered instances instead of failing");

  // convert-labels
  auto* convert_cmd = app.add_subcommand("convert-labels", "CSV label export -> label file");
  std::string csv_path, labels_out;
  convert_cmd->add_option("csv", csv_path, "CSV with image_id,annotation_id,degrees")->required();
  convert_cmd->add_option("out", labels_out, "label file output")->required();

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against ground truth");
  std::string eval_preds, eval_gts;
  double eval_iou = 0.5, eval_conf = 0.0;
  bool exclude_weak = false;
  evaluate_cmd->add_option("preds", eval_preds, "prediction file")->required();
  evaluate_cmd->add_option("gts", eval_gts, "merged annotation JSON")->required();
  evaluate_cmd->add_option("--iou", eval_iou, "matching IoU threshold")
      ->check(CLI::Range(0.0, 1.0));
  evaluate_cmd->add_option("--conf", eval_conf, "confidence floor for matching/recall")
      ->check(CLI::Range(0.0, 1.0));
  evaluate_cmd->add_flag("--exclude-weak", exclude_weak, "drop weak-labeled ground truth");

  // nms
  auto* nms_cmd = app.add_subcommand("nms", "suppress overlapping detections per image");
  std::string nms_preds, nms_out;
  double nms_iou_flag = 0.45;
  nms_cmd->add_option("preds", nms_preds, "prediction file")->required();
  auto* nms_iou_opt =
      nms_cmd->add_option("--iou", nms_iou_flag, "suppression IoU threshold (default from config)")
          ->check(CLI::Range(0.0, 1.0));
  nms_cmd->add_option("--out", nms_out, "output file (default: stdout)");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "boxes + orientation arrows as SVG");
  std::string plot_input, plot_out;
  int plot_w = 0, plot_h = 0;
  std::int64_t plot_image = 0;
  plot_cmd->add_option("input", plot_input, "annotation JSON or prediction file")->required();
  plot_cmd->add_option("out", plot_out, "SVG output path")->required();
  plot_cmd->add_option("--width", plot_w, "canvas width, px")->required()
      ->check(CLI::PositiveNumber);
  plot_cmd->add_option("--height", plot_h, "canvas height, px")->required()
      ->check(CLI::PositiveNumber);
  auto* plot_image_opt =
      plot_cmd->add_option("--image", plot_image, "plot only this image id (default: all)");

  // train-toy
  auto* train_cmd = app.add_subcommand("train-toy", "desk-scale synthetic training run");
  std::string history_path, head_path;
  train_cmd->add_option("--history", history_path, "write per-step loss log here");
  train_cmd->add_option("--head", head_path, "write trained head parameters here");

  // gradcheck
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "analytic gradients vs central differences");
  int gc_seeds = 100;
  double gc_eps = 1e-5, gc_tol = 1e-4, gc_tau = 0.2;
  gradcheck_cmd->add_option("--seeds", gc_seeds, "number of random instances")
      ->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--eps", gc_eps, "finite-difference step")
      ->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--tol", gc_tol, "max relative error to pass")
      ->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--tau", gc_tau, "orientation gate")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; any usage error is 2
  }

  try {
    if (*reconstruct_cmd) {
      return cmd_reconstruct(persons_path, labels_path, weak_path, merged_out, permit_missing);
    }
    if (*convert_cmd) return cmd_convert_labels(csv_path, labels_out);
    if (*evaluate_cmd) return cmd_evaluate(eval_preds, eval_gts, eval_iou, eval_conf, exclude_weak);
    if (*nms_cmd) {
      const PipelineConfig config = pipeline_config_or_default(config_path);
      const double threshold = nms_iou_opt->count() ? nms_iou_flag : config.nms_iou;
      return cmd_nms(nms_preds, threshold, nms_out);
    }
    if (*plot_cmd) {
      const PipelineConfig config = pipeline_config_or_default(config_path);
      std::optional<std::int64_t> only;
      if (plot_image_opt->count()) only = plot_image;
      return cmd_plot(plot_input, plot_out, plot_w, plot_h, only, config);
    }
    if (*train_cmd) {
      return cmd_train_toy(train_config_or_default(config_path), history_path, head_path);
    }
    if (*gradcheck_cmd) return cmd_gradcheck(gc_seeds, gc_eps, gc_tol, gc_tau);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
