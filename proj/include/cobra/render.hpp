#pragma once

#include <limits>
#include <optional>
#include <random>

#include "cobra/scene.hpp"

namespace cobra {

namespace detail {

/// Slab test against an oriented box. The ray direction need not be unit
/// length; the returned t is in units of |dir|.
inline std::optional<double> ray_box(const Point3& origin, const Vec3& dir,
                                     const Pose6DoF& pose, const Vec3& half) {
  const Vec3 o = pose.rotation.transpose() * (origin - pose.position);
  const Vec3 d = pose.rotation.transpose() * dir;
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-15) {
      if (std::abs(o(a)) > half(a)) return std::nullopt;
      continue;
    }
    double lo = (-half(a) - o(a)) / d(a);
    double hi = (half(a) - o(a)) / d(a);
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 1e-9) return std::nullopt;
  return t0;
}

/// Rectangle centered at pose.position in its x-y plane.
inline std::optional<double> ray_rect(const Point3& origin, const Vec3& dir,
                                      const Pose6DoF& pose, double half_x,
                                      double half_y) {
  const Vec3 n = pose.rotation.col(2);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double t = n.dot(pose.position - origin) / denom;
  if (t <= 1e-9) return std::nullopt;
  const Point3 hit = origin + t * dir;
  const Vec3 local = pose.rotation.transpose() * (hit - pose.position);
  if (std::abs(local.x()) > half_x || std::abs(local.y()) > half_y) {
    return std::nullopt;
  }
  return t;
}

inline std::optional<double> ray_ground(const Point3& origin, const Vec3& dir,
                                        double ground_z) {
  if (std::abs(dir.z()) < 1e-15) return std::nullopt;
  const double t = (ground_z - origin.z()) / dir.z();
  if (t <= 1e-9) return std::nullopt;
  return t;
}

/// Nearest hit among box, docking plate, and ground, parameterized so that t
/// equals camera z-depth (ray direction has unit camera-frame z).
inline std::optional<double> cast_depth_ray(const SceneState& scene,
                                            const Point3& origin,
                                            const Vec3& dir_world) {
  std::optional<double> best;
  const auto consider = [&best](const std::optional<double>& t) {
    if (t && (!best || *t < *best)) best = t;
  };
  consider(ray_box(origin, dir_world, scene.box_pose, scene.box_dims / 2.0));
  consider(ray_rect(origin, dir_world, scene.module_pose(),
                    scene.module_width / 2.0, scene.module_height / 2.0));
  consider(ray_ground(origin, dir_world, scene.ground_z));
  return best;
}

}  // namespace detail

inline constexpr double kDepthMinRange = 0.1;  // m

/// Ray-casts the scene into a z-depth frame. Pixels with no hit are invalid.
/// Gaussian noise (if any) is additive, and depths clamp to the 0.1 m
/// minimum range. Noise draws are row-major per pixel from `rng`.
inline DepthFrame render_depth(const SceneState& scene, const Pose6DoF& camera,
                               const CameraIntrinsics& K, double noise_sigma,
                               std::mt19937_64& rng) {
  DepthFrame frame = DepthFrame::empty(K, camera.timestamp);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Vec3 dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Vec3 dir_world = camera.rotation * dir_cam;
      const auto t = detail::cast_depth_ray(scene, camera.position, dir_world);
      if (!t) continue;
      double depth = *t;
      if (noise_sigma > 0.0) depth += noise_sigma * noise(rng);
      frame.set(u, v, std::max(depth, kDepthMinRange));
    }
  }
  return frame;
}

inline DepthFrame render_depth(const SceneState& scene, const Pose6DoF& camera,
                               const CameraIntrinsics& K,
                               double noise_sigma = 0.0,
                               std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  return render_depth(scene, camera, K, noise_sigma, rng);
}

}  // namespace cobra
