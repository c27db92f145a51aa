#include "orientdet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace orientdet {
namespace {

using json = nlohmann::ordered_json;

json parse_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": JSON parse error at byte " + std::to_string(e.byte) + ": " +
                             e.what());
  }
}

double checked_degrees(double degrees, const std::string& where) {
  if (!std::isfinite(degrees) || degrees < 0.0 || degrees > 360.0) {
    throw std::runtime_error(where + ": orientation " + std::to_string(degrees) +
                             " outside [0, 360]");
  }
  return degrees == 360.0 ? 0.0 : degrees;
}

}  // namespace

PersonSet load_person_annotations(const std::string& path) {
  const json doc = parse_file(path);
  PersonSet out;
  try {
    std::set<std::int64_t> person_categories;
    std::set<std::int64_t> known_categories;
    for (const json& c : doc.at("categories")) {
      const std::int64_t id = c.at("id").get<std::int64_t>();
      known_categories.insert(id);
      if (c.at("name").get<std::string>() == "person") person_categories.insert(id);
    }
    if (person_categories.empty()) {
      throw std::runtime_error(path + ": no 'person' category");
    }

    std::set<std::int64_t> image_ids;
    for (const json& im : doc.at("images")) {
      ImageInfo info;
      info.id = im.at("id").get<std::int64_t>();
      info.width = im.value("width", 0);
      info.height = im.value("height", 0);
      info.file_name = im.value("file_name", std::string());
      if (!image_ids.insert(info.id).second) {
        throw std::runtime_error(path + ": duplicate image id " + std::to_string(info.id));
      }
      out.images.push_back(std::move(info));
    }

    std::set<std::int64_t> annotation_ids;
    for (const json& an : doc.at("annotations")) {
      const std::int64_t id = an.at("id").get<std::int64_t>();
      if (!annotation_ids.insert(id).second) {
        throw std::runtime_error(path + ": duplicate annotation id " + std::to_string(id));
      }
      const std::int64_t cat = an.at("category_id").get<std::int64_t>();
      if (!known_categories.count(cat)) {
        ++out.skipped_unknown_category;
        continue;
      }
      if (!person_categories.count(cat)) continue;
      const std::int64_t image_id = an.at("image_id").get<std::int64_t>();
      if (!image_ids.count(image_id)) {
        throw std::runtime_error(path + ": annotation " + std::to_string(id) +
                                 " references unknown image " + std::to_string(image_id));
      }
      if (an.value("iscrowd", 0) != 0) {
        ++out.excluded_crowd;
        continue;
      }
      const json& bb = an.at("bbox");
      if (!bb.is_array() || bb.size() != 4) {
        throw std::runtime_error(path + ": annotation " + std::to_string(id) +
                                 " has malformed bbox");
      }
      const double x = bb[0].get<double>(), y = bb[1].get<double>();
      const double w = bb[2].get<double>(), h = bb[3].get<double>();
      if (!(w > 0.0) || !(h > 0.0)) {
        throw std::runtime_error(path + ": annotation " + std::to_string(id) +
                                 " has degenerate bbox");
      }
      AnnotatedInstance inst;
      inst.image_id = image_id;
      inst.annotation_id = id;
      inst.box = Box2D(x + 0.5 * w, y + 0.5 * h, w, h);
      if (an.contains("orientation")) {
        inst.orientation = OrientationAngle::from_degrees(
            checked_degrees(an.at("orientation").get<double>(),
                            path + ": annotation " + std::to_string(id)));
      }
      inst.weak = an.value("weak", false);
      inst.source = inst.weak ? InstanceSource::kRestored : InstanceSource::kOrientationBenchmark;
      out.persons.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": unexpected layout: " + e.what());
  }

  std::sort(out.images.begin(), out.images.end(),
            [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });
  std::sort(out.persons.begin(), out.persons.end(),
            [](const AnnotatedInstance& a, const AnnotatedInstance& b) {
              if (a.image_id != b.image_id) return a.image_id < b.image_id;
              return a.annotation_id < b.annotation_id;
            });
  return out;
}

LabelMap load_orientation_labels(const std::string& path) {
  const json doc = parse_file(path);
  LabelMap out;
  try {
    for (const json& l : doc.at("orientation_labels")) {
      OrientationLabel lab;
      lab.annotation_id = l.at("annotation_id").get<std::int64_t>();
      lab.image_id = l.at("image_id").get<std::int64_t>();
      lab.degrees = checked_degrees(l.at("degrees").get<double>(),
                                    path + ": annotation " + std::to_string(lab.annotation_id));
      if (!out.emplace(lab.annotation_id, lab).second) {
        throw std::runtime_error(path + ": duplicate label for annotation " +
                                 std::to_string(lab.annotation_id));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": unexpected layout: " + e.what());
  }
  return out;
}

void write_orientation_labels(const std::string& path, const LabelMap& labels) {
  json doc;
  doc["orientation_labels"] = json::array();
  for (const auto& [id, lab] : labels) {
    json rec;
    rec["annotation_id"] = lab.annotation_id;
    rec["image_id"] = lab.image_id;
    rec["degrees"] = std::round(lab.degrees * 1e4) / 1e4;
    doc["orientation_labels"].push_back(std::move(rec));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << doc.dump(2) << '\n';
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

LabelMap convert_labels_csv(const std::string& csv_path) {
  std::ifstream is(csv_path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(is, line) || line != "image_id,annotation_id,degrees") {
    throw std::runtime_error(csv_path + ": expected header 'image_id,annotation_id,degrees'");
  }
  LabelMap out;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    OrientationLabel lab;
    char c1 = 0, c2 = 0;
    if (!(ls >> lab.image_id >> c1 >> lab.annotation_id >> c2 >> lab.degrees) || c1 != ',' ||
        c2 != ',') {
      throw std::runtime_error(csv_path + ": malformed row at line " + std::to_string(line_no));
    }
    lab.degrees = checked_degrees(lab.degrees, csv_path + ": line " + std::to_string(line_no));
    if (!out.emplace(lab.annotation_id, lab).second) {
      throw std::runtime_error(csv_path + ": duplicate label for annotation " +
                               std::to_string(lab.annotation_id));
    }
  }
  return out;
}

Reconstructed reconstruct(const PersonSet& persons, const LabelMap& strong, const LabelMap& weak,
                          const ReconstructOptions& options) {
  // Integrity first: any label naming a known annotation must agree on the
  // image; labels naming unknown annotations are counted and ignored.
  std::map<std::int64_t, const AnnotatedInstance*> by_annotation;
  for (const AnnotatedInstance& p : persons.persons) by_annotation[p.annotation_id] = &p;

  Reconstructed out;
  auto check_integrity = [&](const LabelMap& labels, const char* kind) {
    for (const auto& [id, lab] : labels) {
      const auto it = by_annotation.find(id);
      if (it == by_annotation.end()) {
        ++out.stats.orphan_labels;
        continue;
      }
      if (it->second->image_id != lab.image_id) {
        throw std::runtime_error(std::string(kind) + " label for annotation " +
                                 std::to_string(id) + " names image " +
                                 std::to_string(lab.image_id) + " but the annotation is on image " +
                                 std::to_string(it->second->image_id));
      }
    }
  };
  check_integrity(strong, "strong");
  check_integrity(weak, "weak");

  std::set<std::int64_t> kept_images;
  for (const auto& [id, lab] : strong) {
    if (by_annotation.count(id)) kept_images.insert(by_annotation.at(id)->image_id);
  }

  std::vector<std::int64_t> missing;
  for (const AnnotatedInstance& p : persons.persons) {
    if (!kept_images.count(p.image_id)) {
      ++out.stats.skipped_instances;
      continue;
    }
    AnnotatedInstance inst = p;
    if (const auto it = strong.find(p.annotation_id); it != strong.end()) {
      inst.orientation = OrientationAngle::from_degrees(it->second.degrees);
      inst.weak = false;
      inst.source = InstanceSource::kOrientationBenchmark;
      ++out.stats.strong;
    } else if (const auto wit = weak.find(p.annotation_id); wit != weak.end()) {
      inst.orientation = OrientationAngle::from_degrees(wit->second.degrees);
      inst.weak = true;
      inst.source = InstanceSource::kRestored;
      ++out.stats.weak;
    } else {
      if (!options.permit_missing) {
        missing.push_back(p.annotation_id);
        continue;
      }
      ++out.stats.dropped_missing;
      continue;
    }
    out.instances.push_back(std::move(inst));
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) {
      ids += (i ? ", " : "") + std::to_string(missing[i]);
    }
    if (missing.size() > 8) ids += ", ...";
    throw std::runtime_error("reconstruct: " + std::to_string(missing.size()) +
                             " person instance(s) without any orientation label (annotations: " +
                             ids + "); pass permit_missing to drop them");
  }

  for (const ImageInfo& im : persons.images) {
    if (kept_images.count(im.id)) {
      out.images.push_back(im);
    } else {
      ++out.stats.skipped_images;
    }
  }
  out.stats.images = std::int64_t(out.images.size());
  out.stats.instances = std::int64_t(out.instances.size());
  return out;
}

void write_merged_annotations(const std::string& path, const Reconstructed& merged) {
  json doc;
  doc["images"] = json::array();
  for (const ImageInfo& im : merged.images) {
    json rec;
    rec["id"] = im.id;
    rec["width"] = im.width;
    rec["height"] = im.height;
    if (!im.file_name.empty()) rec["file_name"] = im.file_name;
    doc["images"].push_back(std::move(rec));
  }
  doc["annotations"] = json::array();
  for (const AnnotatedInstance& inst : merged.instances) {
    if (!inst.orientation) {
      throw std::runtime_error("write_merged_annotations: annotation " +
                               std::to_string(inst.annotation_id) + " has no orientation");
    }
    const Corners c = to_corners(inst.box);
    json rec;
    rec["id"] = inst.annotation_id;
    rec["image_id"] = inst.image_id;
    rec["category_id"] = 1;
    rec["bbox"] = {std::round(c.x1 * 1e4) / 1e4, std::round(c.y1 * 1e4) / 1e4,
                   std::round(inst.box.w * 1e4) / 1e4, std::round(inst.box.h * 1e4) / 1e4};
    rec["iscrowd"] = 0;
    rec["orientation"] = std::round(inst.orientation->degrees() * 1e4) / 1e4;
    rec["weak"] = inst.weak;
    doc["annotations"].push_back(std::move(rec));
  }
  doc["categories"] = json::array({json{{"id", 1}, {"name", "person"}}});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << doc.dump(2) << '\n';
  if (!os.good()) throw std::runtime_error("write failed: " + path);
}

LetterboxTransform LetterboxTransform::fit(int src_w, int src_h, int dst_w, int dst_h) {
  if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0) {
    throw std::invalid_argument("LetterboxTransform: dimensions must be positive");
  }
  LetterboxTransform t;
  t.scale = std::min(double(dst_w) / src_w, double(dst_h) / src_h);
  t.pad_x = 0.5 * (dst_w - src_w * t.scale);
  t.pad_y = 0.5 * (dst_h - src_h * t.scale);
  return t;
}

Box2D LetterboxTransform::apply(const Box2D& b) const {
  return Box2D(b.cx * scale + pad_x, b.cy * scale + pad_y, b.w * scale, b.h * scale);
}

Box2D LetterboxTransform::invert(const Box2D& b) const {
  return Box2D((b.cx - pad_x) / scale, (b.cy - pad_y) / scale, b.w / scale, b.h / scale);
}

}  // namespace orientdet
