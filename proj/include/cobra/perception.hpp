#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "cobra/detection.hpp"
#include "cobra/geometry.hpp"
#include "cobra/scene.hpp"

namespace cobra {

/// Sensor and detector corruption knobs; all default to the noiseless case.
struct NoiseSpec {
  double depth_sigma = 0.0;          // m, additive on rendered depth
  double bbox_jitter_px = 0.0;       // Gaussian sigma per bbox edge
  double miss_rate = 0.0;            // per-target drop probability
  double false_positive_rate = 0.0;  // spurious boxes per detector tick
  double pose_sigma_pos = 0.0;       // m, camera pose (VIO stand-in)
  double pose_sigma_rot_deg = 0.0;   // deg, camera pose (VIO stand-in)

  bool detector_noisy() const {
    return bbox_jitter_px > 0.0 || miss_rate > 0.0 || false_positive_rate > 0.0;
  }
};

struct PerceptionConfig {
  double rgb_rate = 30.0;
  double depth_rate = 15.0;
  double detect_rate = 10.0;
  double min_confidence = 0.5;
  double roi_shrink = 0.1;
  OrientationMode mode = OrientationMode::PointPca;

  void validate() const {
    if (!(rgb_rate > 0) || !(depth_rate > 0) || !(detect_rate > 0)) {
      throw ConfigError("perception.rates", "must be > 0");
    }
    if (detect_rate > rgb_rate) {
      throw ConfigError("perception.detect_rate", "must be <= rgb_rate");
    }
    if (!(min_confidence >= 0 && min_confidence <= 1)) {
      throw ConfigError("perception.min_confidence", "must be in [0, 1]");
    }
    if (!(roi_shrink >= 0 && roi_shrink < 1)) {
      throw ConfigError("perception.roi_shrink", "must be in [0, 1)");
    }
  }
};

namespace detail {

/// Tight axis-aligned bbox of projected corners, clipped to the image.
template <typename Corners>
std::optional<BoundingBox> project_bbox(const Corners& corners,
                                        const Pose6DoF& camera,
                                        const CameraIntrinsics& K,
                                        ObjectClass cls) {
  double u0 = std::numeric_limits<double>::infinity(), v0 = u0;
  double u1 = -u0, v1 = -u0;
  int visible = 0;
  for (const auto& c : corners) {
    const Point3 pc = camera.rotation.transpose() * (c - camera.position);
    if (pc.z() < 1e-6) continue;
    const auto pix = reproject_point(pc, K);
    u0 = std::min(u0, pix.u);
    v0 = std::min(v0, pix.v);
    u1 = std::max(u1, pix.u);
    v1 = std::max(v1, pix.v);
    ++visible;
  }
  if (visible == 0) return std::nullopt;
  u0 = std::max(u0, 0.0);
  v0 = std::max(v0, 0.0);
  u1 = std::min(u1, double(K.width));
  v1 = std::min(v1, double(K.height));
  if (!(u0 < u1 && v0 < v1)) return std::nullopt;
  return BoundingBox{u0, v0, u1, v1, cls, 1.0};
}

}  // namespace detail

/// Geometric stand-in for the learned detector: projects each target's 3D
/// corners and returns the tight clipped bbox, optionally corrupted per the
/// noise spec. An empty detection is a valid result.
inline Detection oracle_detect(const SceneState& scene, const Pose6DoF& camera,
                               const CameraIntrinsics& K, const NoiseSpec& noise,
                               std::mt19937_64& rng) {
  Detection det;
  det.timestamp = camera.timestamp;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const auto emit = [&](std::optional<BoundingBox> bbox) {
    if (!bbox) return;
    if (noise.detector_noisy()) {
      if (uni(rng) < noise.miss_rate) return;
      if (noise.bbox_jitter_px > 0.0) {
        bbox->u_min += noise.bbox_jitter_px * gauss(rng);
        bbox->v_min += noise.bbox_jitter_px * gauss(rng);
        bbox->u_max += noise.bbox_jitter_px * gauss(rng);
        bbox->v_max += noise.bbox_jitter_px * gauss(rng);
        bbox->u_min = std::clamp(bbox->u_min, 0.0, double(K.width));
        bbox->u_max = std::clamp(bbox->u_max, 0.0, double(K.width));
        bbox->v_min = std::clamp(bbox->v_min, 0.0, double(K.height));
        bbox->v_max = std::clamp(bbox->v_max, 0.0, double(K.height));
        if (!(bbox->u_min < bbox->u_max && bbox->v_min < bbox->v_max)) return;
      }
      bbox->confidence = std::clamp(0.85 + 0.1 * gauss(rng), 0.5, 1.0);
    }
    det.boxes.push_back(*bbox);
  };

  emit(detail::project_bbox(scene.box_corners(), camera, K, ObjectClass::Box));
  emit(detail::project_bbox(scene.module_corners(), camera, K,
                            ObjectClass::DockingModule));

  if (noise.false_positive_rate > 0.0 && uni(rng) < noise.false_positive_rate) {
    const double u0 = uni(rng) * (K.width - 20);
    const double v0 = uni(rng) * (K.height - 20);
    const double w = 10.0 + uni(rng) * 80.0;
    const double h = 10.0 + uni(rng) * 80.0;
    det.boxes.push_back({u0, v0, std::min(u0 + w, double(K.width)),
                         std::min(v0 + h, double(K.height)),
                         uni(rng) < 0.5 ? ObjectClass::Box
                                        : ObjectClass::DockingModule,
                         0.5 + 0.4 * uni(rng)});
  }
  return det;
}

/// Detector adapter around oracle_detect: pulls scene and camera snapshots
/// through callbacks keyed on the frame timestamp.
class OracleDetector final : public DetectorInterface {
 public:
  using SceneFn = std::function<const SceneState&(double)>;
  using CameraFn = std::function<Pose6DoF(double)>;

  OracleDetector(SceneFn scene, CameraFn camera, CameraIntrinsics K,
                 NoiseSpec noise, std::uint64_t seed)
      : scene_(std::move(scene)), camera_(std::move(camera)), K_(K),
        noise_(noise), rng_(seed) {}

  Detection detect(const RgbFrame& rgb) override {
    return oracle_detect(scene_(rgb.timestamp), camera_(rgb.timestamp), K_,
                         noise_, rng_);
  }

 private:
  SceneFn scene_;
  CameraFn camera_;
  CameraIntrinsics K_;
  NoiseSpec noise_;
  std::mt19937_64 rng_;
};

/// Crops the bbox region shrunk inward by roi_shrink per side, keeping the
/// validity mask. The region is clipped to the image.
inline DepthRoi extract_roi_depth(const DepthFrame& depth,
                                  const BoundingBox& bbox, double roi_shrink) {
  const auto& K = depth.intrinsics;
  const double mu = roi_shrink * bbox.width();
  const double mv = roi_shrink * bbox.height();
  const int u0 = std::max(0, int(std::lround(bbox.u_min + mu)));
  const int v0 = std::max(0, int(std::lround(bbox.v_min + mv)));
  const int u1 = std::min(K.width, int(std::lround(bbox.u_max - mu)));
  const int v1 = std::min(K.height, int(std::lround(bbox.v_max - mv)));
  if (u1 <= u0 || v1 <= v0) {
    throw EmptyRoi("extract_roi_depth: shrunk ROI is empty");
  }

  DepthRoi roi;
  roi.intrinsics = K;
  roi.timestamp = depth.timestamp;
  roi.u0 = u0;
  roi.v0 = v0;
  roi.width = u1 - u0;
  roi.height = v1 - v0;
  roi.depth.resize(std::size_t(roi.width) * roi.height);
  roi.valid.resize(roi.depth.size());
  std::size_t n_valid = 0;
  for (int j = 0; j < roi.height; ++j) {
    for (int i = 0; i < roi.width; ++i) {
      const std::size_t k = roi.index(i, j);
      roi.depth[k] = depth.at(u0 + i, v0 + j);
      roi.valid[k] = depth.is_valid(u0 + i, v0 + j);
      n_valid += roi.valid[k];
    }
  }
  if (n_valid == 0) {
    throw EmptyRoi("extract_roi_depth: no valid depth pixel in ROI");
  }
  return roi;
}

enum class EstimateReason : std::uint8_t {
  Ok,
  NoDetection,
  EmptyRoi,
  DegenerateCloud,
  RankDeficient,
};

inline const char* estimate_reason_name(EstimateReason r) {
  switch (r) {
    case EstimateReason::Ok: return "ok";
    case EstimateReason::NoDetection: return "no_detection";
    case EstimateReason::EmptyRoi: return "empty_roi";
    case EstimateReason::DegenerateCloud: return "degenerate_cloud";
    case EstimateReason::RankDeficient: return "rank_deficient";
  }
  return "?";
}

struct PoseEstimate {
  std::optional<Pose6DoF> world;   // composed world pose
  std::optional<Pose6DoF> camera;  // module-in-camera, feeds the next align
  EstimateReason reason = EstimateReason::NoDetection;

  explicit operator bool() const { return world.has_value(); }
};

/// Full detection-to-pose pipeline for one detector tick: pick the best
/// docking-module bbox, crop depth, unproject, normals, frame fit, temporal
/// alignment, world composition. Geometric failures come back as an empty
/// estimate with a reason code.
inline PoseEstimate estimate_module_pose(const RgbFrame& rgb,
                                         const DepthFrame& depth,
                                         DetectorInterface& detector,
                                         const std::optional<Pose6DoF>& previous,
                                         const Pose6DoF& camera_in_world,
                                         const PerceptionConfig& cfg) {
  if (std::abs(rgb.timestamp - depth.timestamp) >= 1.0 / cfg.depth_rate) {
    throw FrameSync("estimate_module_pose: rgb at " +
                    std::to_string(rgb.timestamp) + " vs depth at " +
                    std::to_string(depth.timestamp));
  }
  const Detection det = detector.detect(rgb);
  const BoundingBox* best = nullptr;
  for (const auto& b : det.boxes) {
    if (b.class_id != ObjectClass::DockingModule) continue;
    if (b.confidence < cfg.min_confidence) continue;
    if (!best || b.confidence > best->confidence ||
        (b.confidence == best->confidence && b.area() > best->area())) {
      best = &b;
    }
  }
  PoseEstimate out;
  if (!best) {
    out.reason = EstimateReason::NoDetection;
    return out;
  }
  try {
    const DepthRoi roi = extract_roi_depth(depth, *best, cfg.roi_shrink);
    const OrderedPointCloud cloud = unproject_cloud(roi);
    const NormalCloud normals = compute_normals(cloud);
    Pose6DoF in_camera = estimate_frame(cloud, normals, cfg.mode, rgb.timestamp);
    in_camera = align_orientation(in_camera, previous);
    out.camera = in_camera;
    out.world = compose_pose(camera_in_world, in_camera);
    out.reason = EstimateReason::Ok;
  } catch (const EmptyRoi&) {
    out.reason = EstimateReason::EmptyRoi;
  } catch (const DegenerateCloud&) {
    out.reason = EstimateReason::DegenerateCloud;
  } catch (const RankDeficient&) {
    out.reason = EstimateReason::RankDeficient;
  }
  return out;
}

}  // namespace cobra
