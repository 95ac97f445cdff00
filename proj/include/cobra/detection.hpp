#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cobra/errors.hpp"
#include "cobra/geometry.hpp"

namespace cobra {

enum class ObjectClass : std::uint8_t { Box = 0, DockingModule = 1 };

inline const char* object_class_name(ObjectClass c) {
  return c == ObjectClass::Box ? "box" : "docking_module";
}

inline ObjectClass object_class_from_name(const std::string& name) {
  if (name == "box") return ObjectClass::Box;
  if (name == "docking_module") return ObjectClass::DockingModule;
  throw ConfigError("class", "unknown object class '" + name + "'");
}

/// Axis-aligned pixel box, corners in continuous image coordinates.
struct BoundingBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;
  ObjectClass class_id = ObjectClass::Box;
  double confidence = 1.0;

  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
  double area() const { return width() * height(); }

  void validate(const CameraIntrinsics* K = nullptr) const {
    if (!(u_min < u_max) || !(v_min < v_max)) {
      throw ConfigError("bbox", "requires u_min < u_max and v_min < v_max");
    }
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw ConfigError("bbox.confidence", "must be in [0, 1]");
    }
    if (K && (u_min < 0 || v_min < 0 || u_max > K->width || v_max > K->height)) {
      throw ConfigError("bbox", "outside image bounds");
    }
  }
};

struct Detection {
  std::vector<BoundingBox> boxes;
  double timestamp = 0.0;
};

/// Detector contract: deterministic given the frame and the detector's seed.
class DetectorInterface {
 public:
  virtual ~DetectorInterface() = default;
  virtual Detection detect(const RgbFrame& rgb) = 0;
};

}  // namespace cobra
