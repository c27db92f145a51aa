#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orientdet/geometry.hpp"
#include "orientdet/instance.hpp"

namespace orientdet {

struct ImageInfo {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

// Person annotations pulled from a detection-benchmark JSON file (standard
// images/annotations/categories layout, bbox as [x, y, w, h]). Non-person
// annotations are ignored; person crowd regions are excluded and counted;
// annotations with category ids missing from the categories table are
// skipped and counted. Orientation/weak fields are picked up when present,
// so the same loader reads merged files back.
struct PersonSet {
  std::vector<ImageInfo> images;           // sorted by id
  std::vector<AnnotatedInstance> persons;  // sorted by (image_id, annotation_id)
  std::int64_t skipped_unknown_category = 0;
  std::int64_t excluded_crowd = 0;
};

PersonSet load_person_annotations(const std::string& path);

// Flat orientation label map: annotation id -> (image id, degrees). The
// image id is redundant and used purely as an integrity check.
struct OrientationLabel {
  std::int64_t annotation_id = 0;
  std::int64_t image_id = 0;
  double degrees = 0.0;  // [0, 360); 360 folds to 0 at load time
};

using LabelMap = std::map<std::int64_t, OrientationLabel>;

LabelMap load_orientation_labels(const std::string& path);
void write_orientation_labels(const std::string& path, const LabelMap& labels);

// Converter for label exports shipped as CSV. Expected layout: a header line
// "image_id,annotation_id,degrees" followed by one row per labeled instance.
LabelMap convert_labels_csv(const std::string& csv_path);

struct ReconstructOptions {
  bool permit_missing = false;  // drop uncovered instances instead of failing
};

struct DatasetStats {
  std::int64_t images = 0;             // images kept (those with a strong label)
  std::int64_t instances = 0;          // persons kept (= strong + weak)
  std::int64_t strong = 0;
  std::int64_t weak = 0;
  std::int64_t dropped_missing = 0;    // uncovered persons dropped under permit_missing
  std::int64_t skipped_images = 0;     // images without any strong label
  std::int64_t skipped_instances = 0;  // persons on those images
  std::int64_t orphan_labels = 0;      // labels whose annotation id is absent
};

struct Reconstructed {
  std::vector<ImageInfo> images;           // kept images, sorted by id
  std::vector<AnnotatedInstance> instances;  // sorted by (image_id, annotation_id)
  DatasetStats stats;
};

// Merge detection-benchmark persons with orientation labels: instances in
// the strong map keep their measured orientation; the remaining persons on
// those same images take the weak map's restored orientation (weak = true).
// A person covered by both maps takes the strong label. Persons on images
// with no strong label at all are skipped wholesale. An uncovered person on
// a kept image is an error unless permit_missing is set.
Reconstructed reconstruct(const PersonSet& persons, const LabelMap& strong, const LabelMap& weak,
                          const ReconstructOptions& options = {});

// Write the merged set in the source layout plus per-annotation
// "orientation" (degrees, 4 decimals) and "weak" fields. Output bytes are a
// pure function of the content.
void write_merged_annotations(const std::string& path, const Reconstructed& merged);

// Aspect-preserving resize-and-pad onto a square (or general) target frame.
struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;

  static LetterboxTransform fit(int src_w, int src_h, int dst_w, int dst_h);
  Box2D apply(const Box2D& original) const;   // original -> letterboxed frame
  Box2D invert(const Box2D& letterboxed) const;
};

}  // namespace orientdet
