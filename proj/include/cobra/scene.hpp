#pragma once

#include <Eigen/Dense>
#include <array>

#include "cobra/geometry.hpp"
#include "cobra/snake.hpp"

namespace cobra {

/// World model: a box with a docking plate on one face, the robot, and the
/// goal. The module is rigidly attached to the box (+x face, plate normal
/// along box +x); while latched, the box rides rigidly on the robot head.
///
/// The robot's kinematic plane is z = 0 (link centers ride one link radius
/// above the ground), so the render ground sits at ground_z < 0 and the
/// plate is mounted low on the box face, centered at head height.
struct SceneState {
  Pose6DoF box_pose;                    // world, frame = World
  Vec3 box_dims{0.4, 0.4, 0.4};         // full extents along box local axes
  double module_width = 0.4;            // plate extent along module x
  double module_height = 0.16;          // plate extent along module y
  double module_offset = 0.02;          // plate stands proud of the face
  double module_z_offset = -0.12;       // plate center below the box center
  double ground_z = -0.08;              // render ground plane
  SnakeState robot;
  bool latched = false;
  Point3 goal = Point3::Zero();

  /// Plate frame: origin at the outer plate center, z = outward face normal,
  /// x = the plate's long (horizontal) direction.
  Pose6DoF module_pose() const {
    Pose6DoF m;
    m.frame = Frame::World;
    const Eigen::Matrix3d& B = box_pose.rotation;
    m.rotation.col(2) = B.col(0);                   // outward normal
    m.rotation.col(0) = -B.col(1);                  // plate x
    m.rotation.col(1) = m.rotation.col(2).cross(m.rotation.col(0));
    m.position = box_pose.position +
                 B * Vec3(box_dims.x() / 2.0 + module_offset, 0.0, module_z_offset);
    m.timestamp = box_pose.timestamp;
    return m;
  }

  std::array<Point3, 4> module_corners() const {
    const Pose6DoF m = module_pose();
    const Vec3 x = m.rotation.col(0) * (module_width / 2.0);
    const Vec3 y = m.rotation.col(1) * (module_height / 2.0);
    return {m.position + x + y, m.position + x - y, m.position - x + y,
            m.position - x - y};
  }

  std::array<Point3, 8> box_corners() const {
    std::array<Point3, 8> out;
    int idx = 0;
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        for (int sz : {-1, 1}) {
          out[idx++] = box_pose.position +
                       box_pose.rotation * Vec3(sx * box_dims.x() / 2.0,
                                                sy * box_dims.y() / 2.0,
                                                sz * box_dims.z() / 2.0);
        }
      }
    }
    return out;
  }
};

/// World pose of the head-mounted camera. The default mount looks along the
/// head's +x with image x to the robot's right and image y downward.
inline Eigen::Matrix3d default_camera_mount() {
  Eigen::Matrix3d m;
  // columns: camera x, y, z expressed in the head frame
  m.col(0) = Vec3(0, -1, 0);
  m.col(1) = Vec3(0, 0, -1);
  m.col(2) = Vec3(1, 0, 0);
  return m;
}

inline Pose6DoF head_camera_pose(const SnakeState& robot,
                                 const RobotParams& params,
                                 const Eigen::Matrix3d& mount_rotation,
                                 const Vec3& mount_offset) {
  const Pose6DoF head = head_pose(robot, params);
  Pose6DoF cam;
  cam.frame = Frame::World;
  cam.rotation = head.rotation * mount_rotation;
  cam.position = head.position + head.rotation * mount_offset;
  cam.timestamp = robot.time;
  return cam;
}

inline Pose6DoF head_camera_pose(const SnakeState& robot,
                                 const RobotParams& params) {
  return head_camera_pose(robot, params, default_camera_mount(),
                          params.camera_offset);
}

}  // namespace cobra
