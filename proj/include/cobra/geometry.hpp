#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cobra/errors.hpp"
#include "cobra/mathutil.hpp"

namespace cobra {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;

enum class Frame : std::uint8_t { Camera, World };

inline const char* frame_name(Frame f) {
  return f == Frame::Camera ? "camera" : "world";
}

/// Pinhole parameters. Pixel coordinates are (u right, v down), the camera
/// looks along +z with +x right and +y down.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0)) throw ConfigError("fx", "must be > 0");
    if (!(fy > 0.0)) throw ConfigError("fy", "must be > 0");
    if (!(cx >= 0.0 && cx < width)) throw ConfigError("cx", "must be in [0, width)");
    if (!(cy >= 0.0 && cy < height)) throw ConfigError("cy", "must be in [0, height)");
  }
};

/// Row-major depth grid in meters. Depth 0 encodes "no return"; every valid
/// pixel carries depth > 0.
struct DepthFrame {
  CameraIntrinsics intrinsics;
  double timestamp = 0.0;
  std::vector<double> data;
  std::vector<std::uint8_t> valid;

  static DepthFrame empty(const CameraIntrinsics& K, double t) {
    DepthFrame f;
    f.intrinsics = K;
    f.timestamp = t;
    f.data.assign(static_cast<std::size_t>(K.width) * K.height, 0.0);
    f.valid.assign(f.data.size(), 0);
    return f;
  }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * intrinsics.width + u;
  }
  double at(int u, int v) const { return data[index(u, v)]; }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  void set(int u, int v, double depth) {
    const std::size_t i = index(u, v);
    if (depth > 0.0) {
      data[i] = depth;
      valid[i] = 1;
    } else {
      data[i] = 0.0;
      valid[i] = 0;
    }
  }
};

/// Image-frame companion of DepthFrame. Pixel payload is an optional
/// per-pixel class silhouette (0 = background); the geometric detector does
/// not consume it, so it is typically left empty.
struct RgbFrame {
  CameraIntrinsics intrinsics;
  double timestamp = 0.0;
  std::vector<std::uint8_t> class_mask;
};

/// Rotation + position in a named frame. rotation columns are the frame's
/// x/y/z axes expressed in the parent frame.
struct Pose6DoF {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Frame frame = Frame::Camera;
  double timestamp = 0.0;

  Eigen::Vector3d axis_x() const { return rotation.col(0); }
  Eigen::Vector3d axis_y() const { return rotation.col(1); }
  Eigen::Vector3d axis_z() const { return rotation.col(2); }

  bool rotation_ok(double tol = 1e-9) const { return rotation_error(rotation) <= tol; }
};

/// Rectangular sub-region of a DepthFrame. (u0, v0) is the region's top-left
/// pixel in the source image; intrinsics stay those of the full image.
struct DepthRoi {
  CameraIntrinsics intrinsics;
  double timestamp = 0.0;
  int u0 = 0;
  int v0 = 0;
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * width + i;
  }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
  }
};

/// Point grid preserving the pixel adjacency of its source ROI. Absent
/// entries mark invalid depth pixels.
struct OrderedPointCloud {
  int width = 0;
  int height = 0;
  int u0 = 0;  // source-image pixel of grid column 0
  int v0 = 0;  // source-image pixel of grid row 0
  std::vector<std::optional<Point3>> points;
  std::size_t present = 0;

  const std::optional<Point3>& at(int i, int j) const {
    return points[static_cast<std::size_t>(j) * width + i];
  }
};

/// Unit surface normals with the camera-frame point each was computed at.
struct NormalCloud {
  std::vector<Vec3> normals;
  std::vector<Point3> anchors;

  std::size_t size() const { return normals.size(); }
};

/// Pixel + depth triple produced by reprojection.
struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Back-projects pixel (u, v) at the given depth into the camera frame:
/// [(u-cx)d/fx, (v-cy)d/fy, d].
inline Point3 project_pixel(double u, double v, double depth,
                            const CameraIntrinsics& K) {
  if (!(depth > 0.0)) {
    throw NonPositiveDepth("project_pixel: depth " + std::to_string(depth));
  }
  if (u < 0.0 || v < 0.0 || u >= K.width || v >= K.height) {
    throw OutOfBounds("project_pixel: pixel (" + std::to_string(u) + ", " +
                      std::to_string(v) + ") outside " + std::to_string(K.width) +
                      "x" + std::to_string(K.height));
  }
  return {(u - K.cx) * depth / K.fx, (v - K.cy) * depth / K.fy, depth};
}

/// Forward pinhole map of a camera-frame point; inverse of project_pixel.
/// Does not bounds-check: off-image results are legitimate for visibility
/// tests.
inline PixelDepth reproject_point(const Point3& p, const CameraIntrinsics& K) {
  if (!(p.z() > 0.0)) {
    throw NonPositiveDepth("reproject_point: z " + std::to_string(p.z()));
  }
  return {K.cx + p.x() * K.fx / p.z(), K.cy + p.y() * K.fy / p.z(), p.z()};
}

/// Back-projects every valid ROI pixel, preserving grid adjacency.
inline OrderedPointCloud unproject_cloud(const DepthRoi& roi) {
  OrderedPointCloud cloud;
  cloud.width = roi.width;
  cloud.height = roi.height;
  cloud.u0 = roi.u0;
  cloud.v0 = roi.v0;
  cloud.points.assign(static_cast<std::size_t>(roi.width) * roi.height,
                      std::nullopt);
  for (int j = 0; j < roi.height; ++j) {
    for (int i = 0; i < roi.width; ++i) {
      const std::size_t k = roi.index(i, j);
      if (!roi.valid[k]) continue;
      cloud.points[k] =
          project_pixel(roi.u0 + i, roi.v0 + j, roi.depth[k], roi.intrinsics);
      ++cloud.present;
    }
  }
  if (cloud.present == 0) {
    throw EmptyRoi("unproject_cloud: no valid pixel in ROI");
  }
  return cloud;
}

/// Per-pixel normals from forward differences: t_x to the right neighbor,
/// t_y to the down neighbor, n = t_x x t_y normalized and flipped to point
/// toward the camera (n . p < 0). Pixels lacking a present neighbor are
/// skipped.
inline NormalCloud compute_normals(const OrderedPointCloud& cloud) {
  NormalCloud out;
  out.normals.reserve(cloud.points.size());
  out.anchors.reserve(cloud.points.size());
  for (int j = 0; j + 1 < cloud.height; ++j) {
    for (int i = 0; i + 1 < cloud.width; ++i) {
      const auto& p = cloud.at(i, j);
      const auto& right = cloud.at(i + 1, j);
      const auto& down = cloud.at(i, j + 1);
      if (!p || !right || !down) continue;
      const Vec3 tx = *right - *p;
      const Vec3 ty = *down - *p;
      Vec3 n = tx.cross(ty);
      const double len = n.norm();
      if (len < 1e-30) continue;
      n /= len;
      if (n.dot(*p) > 0.0) n = -n;
      out.normals.push_back(n);
      out.anchors.push_back(*p);
    }
  }
  if (out.normals.size() < 3) {
    throw DegenerateCloud("compute_normals: only " +
                          std::to_string(out.normals.size()) +
                          " normals could be formed");
  }
  return out;
}

enum class OrientationMode : std::uint8_t {
  /// SVD of the mean-centered points; z = least-variance direction.
  PointPca,
  /// SVD of the stacked normals; z = dominant left singular vector.
  NormalSvd,
};

namespace detail {

/// Columns of U for the 3xN matrix whose columns are `vecs` (optionally
/// mean-centered), ordered by descending singular value. Also reports the
/// singular values.
inline void left_singular_basis(const std::vector<Vec3>& vecs,
                                const std::optional<Vec3>& center,
                                Eigen::Matrix3d& U, Eigen::Vector3d& sigma) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(vecs.size()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    m.col(i) = center ? Vec3(vecs[i] - *center) : vecs[i];
  }
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(m, Eigen::ComputeFullU);
  U = svd.matrixU();
  sigma = svd.singularValues();
}

}  // namespace detail

/// Surface frame of an ordered cloud: position is the compensated mean of
/// the present points; orientation comes from SVD per `mode`, with z flipped
/// toward the camera and y recomputed as z x x so the result is a proper
/// rotation.
inline Pose6DoF estimate_frame(const OrderedPointCloud& cloud,
                               const NormalCloud& normals,
                               OrientationMode mode = OrientationMode::PointPca,
                               double timestamp = 0.0) {
  std::vector<Point3> pts;
  pts.reserve(cloud.present);
  for (const auto& p : cloud.points) {
    if (p) pts.push_back(*p);
  }
  if (pts.size() < 3) {
    throw RankDeficient("estimate_frame: fewer than 3 points");
  }
  const Point3 centroid = compensated_mean(pts, pts.size());

  Eigen::Matrix3d U;
  Eigen::Vector3d sigma;
  Vec3 x_axis, z_axis;
  if (mode == OrientationMode::PointPca) {
    detail::left_singular_basis(pts, centroid, U, sigma);
    if (sigma(1) < 1e-9 * sigma(0)) {
      throw RankDeficient("estimate_frame: points collinear (sigma2/sigma1 = " +
                          std::to_string(sigma(0) > 0 ? sigma(1) / sigma(0) : 0.0) +
                          ")");
    }
    x_axis = U.col(0);
    z_axis = U.col(2);
  } else {
    detail::left_singular_basis(normals.normals, std::nullopt, U, sigma);
    if (sigma(0) <= 0.0) {
      throw RankDeficient("estimate_frame: empty normal cloud");
    }
    z_axis = U.col(0);
    x_axis = U.col(1);
  }

  if (z_axis.dot(centroid) > 0.0) z_axis = -z_axis;

  Pose6DoF pose;
  pose.rotation.col(0) = x_axis;
  pose.rotation.col(2) = z_axis;
  pose.rotation.col(1) = z_axis.cross(x_axis);
  pose.position = centroid;
  pose.frame = Frame::Camera;
  pose.timestamp = timestamp;
  return pose;
}

/// Flips x/z axes to stay consistent with the previous orientation (or, with
/// no previous pose, enforces the toward-camera z convention and a
/// deterministic first-frame x sign), then recomputes y = z x x.
inline Pose6DoF align_orientation(const Pose6DoF& candidate,
                                  const std::optional<Pose6DoF>& previous) {
  Pose6DoF out = candidate;
  Vec3 x = candidate.rotation.col(0);
  Vec3 z = candidate.rotation.col(2);
  if (previous) {
    if (x.dot(previous->rotation.col(0)) < 0.0) x = -x;
    if (z.dot(previous->rotation.col(2)) < 0.0) z = -z;
  } else {
    if (candidate.frame == Frame::Camera && z.dot(candidate.position) > 0.0) {
      z = -z;
    }
    x = lexicographic_sign_fix(x);
  }
  out.rotation.col(0) = x;
  out.rotation.col(2) = z;
  out.rotation.col(1) = z.cross(x);
  return out;
}

/// (world <- camera) composed with (camera <- module) gives the module pose
/// in the world frame.
inline Pose6DoF compose_pose(const Pose6DoF& camera_in_world,
                             const Pose6DoF& module_in_camera) {
  if (camera_in_world.frame != Frame::World) {
    throw FrameMismatch(std::string("compose_pose: camera pose tagged '") +
                        frame_name(camera_in_world.frame) + "', expected 'world'");
  }
  if (module_in_camera.frame != Frame::Camera) {
    throw FrameMismatch(std::string("compose_pose: module pose tagged '") +
                        frame_name(module_in_camera.frame) + "', expected 'camera'");
  }
  Pose6DoF out;
  out.rotation = camera_in_world.rotation * module_in_camera.rotation;
  out.position =
      camera_in_world.rotation * module_in_camera.position + camera_in_world.position;
  out.frame = Frame::World;
  out.timestamp = module_in_camera.timestamp;
  return out;
}

}  // namespace cobra
