#pragma once

#include <cstdint>
#include <optional>

#include "orientdet/angles.hpp"
#include "orientdet/geometry.hpp"

namespace orientdet {

enum class InstanceSource {
  kOrientationBenchmark,  // carries a measured orientation label
  kRestored,              // person box restored from the detection benchmark
};

// One person instance. The box is in original-image pixels; orientation may
// be absent before label merging. weak == true implies source == kRestored.
struct AnnotatedInstance {
  std::int64_t image_id = 0;
  std::int64_t annotation_id = 0;
  Box2D box;
  std::optional<OrientationAngle> orientation;
  bool weak = false;
  InstanceSource source = InstanceSource::kOrientationBenchmark;
};

}  // namespace orientdet
