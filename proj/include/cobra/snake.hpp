#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cobra/errors.hpp"
#include "cobra/geometry.hpp"
#include "cobra/mathutil.hpp"

namespace cobra {

/// Robot description. Defaults model a 12-link chain with equal link masses;
/// k and beta are the frozen calibration constants of the flat-ground
/// displacement model.
struct RobotParams {
  int link_count = 12;
  double link_length = 0.16;   // m
  double link_mass = 0.35;     // kg
  double joint_limit = kPi / 2;
  double k = 0.02;             // displacement gain, m/rad^2
  double beta = 0.0;           // sidewinding drift angle, rad
  double max_heading_rate = 0.6;  // rad/s
  double max_step_dt = 1.0 / 500.0;
  // Vertical wave amplitude as a fraction of `a`. Equal amplitudes leave the
  // chassis middle/least singular values nearly tied, so the frame ordering
  // becomes unstable; 0.5 keeps them well separated.
  double vertical_ratio = 0.5;
  // Camera mount on the head link, head frame (x forward, y left, z up).
  Eigen::Vector3d camera_offset{0.08, 0.0, 0.04};

  int joint_count() const { return link_count - 1; }

  void validate() const {
    if (link_count < 2) throw ConfigError("robot.link_count", "must be >= 2");
    if (!(link_length > 0)) throw ConfigError("robot.link_length", "must be > 0");
    if (!(link_mass > 0)) throw ConfigError("robot.link_mass", "must be > 0");
    if (!(joint_limit > 0) || joint_limit > kPi / 2 + 1e-12) {
      throw ConfigError("robot.joint_limit", "must be in (0, pi/2]");
    }
  }
};

/// Sidewinding gait: joint i follows a * sin(omega * t + i * phi), with odd
/// joints running the vertical wave a quarter period ahead.
struct GaitParams {
  double a = 0.0;      // amplitude, rad
  double omega = 1.0;  // temporal frequency, rad/s
  double phi = 0.0;    // per-joint phase offset, rad
};

struct SnakeState {
  std::vector<double> link_masses;
  std::vector<Point3> link_positions;  // world, link centers
  std::vector<double> joint_angles;
  double heading = 0.0;  // rad, world yaw of the chassis x axis
  double time = 0.0;

  int link_count() const { return static_cast<int>(link_positions.size()); }
};

/// Floating body frame at the center of mass.
struct ComFrame {
  Point3 origin = Point3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
};

/// Mass-weighted mean of the link positions (compensated summation).
inline Point3 compute_com(const SnakeState& state) {
  CompensatedSum sx, sy, sz, sm;
  for (int i = 0; i < state.link_count(); ++i) {
    const double m = state.link_masses[i];
    sx.add(m * state.link_positions[i].x());
    sy.add(m * state.link_positions[i].y());
    sz.add(m * state.link_positions[i].z());
    sm.add(m);
  }
  const double total = sm.value();
  return {sx.value() / total, sy.value() / total, sz.value() / total};
}

namespace detail {

/// Sign convention for a chassis axis with no previous frame: nonnegative dot
/// with the preferred world axis, ties cascading through the other two.
inline Vec3 axis_sign_fix(const Vec3& v, int preferred) {
  const int order[3] = {preferred, (preferred + 1) % 3, (preferred + 2) % 3};
  for (int idx : order) {
    if (v(idx) > 0.0) return v;
    if (v(idx) < 0.0) return -v;
  }
  return v;
}

}  // namespace detail

/// COM frame from SVD of the mean-centered link positions. With a previous
/// frame the x/z axes are sign-aligned to it (same rule as
/// align_orientation); otherwise x prefers world +x and z world +z.
inline ComFrame com_frame(const SnakeState& state,
                          const std::optional<ComFrame>& previous = std::nullopt) {
  ComFrame out;
  out.origin = compute_com(state);

  Eigen::Matrix3d U;
  Eigen::Vector3d sigma;
  detail::left_singular_basis(state.link_positions, out.origin, U, sigma);
  if (sigma(0) < 1e-12) {
    throw RankDeficient("com_frame: all links coincide");
  }
  Vec3 x = U.col(0);
  Vec3 z = U.col(2);
  if (sigma(1) < 1e-9 * sigma(0)) {
    // Collinear chain: the lateral axes are undefined, complete the basis
    // with z as close to world +z as the x axis allows.
    const Vec3 ref = std::abs(x.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
    z = (ref - ref.dot(x) * x).normalized();
  }
  if (previous) {
    if (x.dot(previous->axes.col(0)) < 0.0) x = -x;
    if (z.dot(previous->axes.col(2)) < 0.0) z = -z;
  } else {
    x = detail::axis_sign_fix(x, 0);
    z = detail::axis_sign_fix(z, 2);
  }
  out.axes.col(0) = x;
  out.axes.col(2) = z;
  out.axes.col(1) = z.cross(x);
  return out;
}

/// Joint angles of the sidewinding wave at time t. Even joints bend in the
/// horizontal plane, odd joints vertically with a 90 degree temporal lead.
inline std::vector<double> gait_joint_angles(const GaitParams& params, double t,
                                             int joint_count = 11,
                                             double vertical_ratio = 1.0) {
  std::vector<double> angles(joint_count);
  for (int i = 0; i < joint_count; ++i) {
    const bool vertical = (i % 2) != 0;
    const double phase = params.omega * t + i * params.phi + (vertical ? kPi / 2 : 0.0);
    angles[i] = params.a * (vertical ? vertical_ratio : 1.0) * std::sin(phase);
  }
  return angles;
}

/// Flat-ground COM displacement over dt: k * a * omega * dt along
/// heading + beta, zero vertical component.
inline Vec3 predict_com_displacement(const GaitParams& params, double heading,
                                     double dt, double k = 0.02,
                                     double beta = 0.0) {
  if (!(dt > 0.0)) throw Error("predict_com_displacement: dt must be > 0");
  const double step = k * params.a * params.omega * dt;
  return {step * std::cos(heading + beta), step * std::sin(heading + beta), 0.0};
}

namespace detail {

struct LocalChain {
  std::vector<Point3> centers;
  std::vector<Eigen::Matrix3d> rotations;
};

/// Chain built head-first in the body frame: link 0 centered at the origin
/// with identity orientation, successive links extending toward -x. Even
/// joints rotate about z (yaw), odd about y (pitch).
inline LocalChain build_chain(const std::vector<double>& joint_angles,
                              double link_length) {
  LocalChain chain;
  const int links = static_cast<int>(joint_angles.size()) + 1;
  chain.centers.resize(links);
  chain.rotations.resize(links);
  chain.centers[0] = Point3::Zero();
  chain.rotations[0] = Eigen::Matrix3d::Identity();
  const Vec3 half_back(-link_length / 2.0, 0.0, 0.0);
  for (int i = 1; i < links; ++i) {
    const double theta = joint_angles[i - 1];
    const Eigen::Matrix3d J =
        ((i - 1) % 2 == 0) ? rot_z(theta) : rot_y(theta);
    chain.rotations[i] = chain.rotations[i - 1] * J;
    const Point3 joint = chain.centers[i - 1] + chain.rotations[i - 1] * half_back;
    chain.centers[i] = joint + chain.rotations[i] * half_back;
  }
  return chain;
}

/// Chassis frame of a local chain (stateless sign convention).
inline ComFrame local_chassis(const LocalChain& chain,
                              const std::vector<double>& masses) {
  SnakeState tmp;
  tmp.link_positions = chain.centers;
  tmp.link_masses = masses;
  return com_frame(tmp);
}

}  // namespace detail

/// World pose of link `index` given a COM position and heading: the local
/// chain is expressed in its chassis frame, yawed by `heading` and planted at
/// the COM.
inline Pose6DoF link_pose(const SnakeState& state, const RobotParams& robot,
                          int index) {
  const auto chain = detail::build_chain(state.joint_angles, robot.link_length);
  const auto chassis = detail::local_chassis(chain, state.link_masses);
  const Eigen::Matrix3d W = rot_z(state.heading) * chassis.axes.transpose();
  const Point3 com = compute_com(state);
  Pose6DoF pose;
  pose.rotation = W * chain.rotations[index];
  pose.position = com + W * (chain.centers[index] - chassis.origin);
  pose.frame = Frame::World;
  pose.timestamp = state.time;
  return pose;
}

inline Pose6DoF head_pose(const SnakeState& state, const RobotParams& robot) {
  return link_pose(state, robot, 0);
}

/// Builds a state with the given joint angles and the COM planted at `com`.
inline SnakeState make_state(const RobotParams& robot, const Point3& com,
                             double heading,
                             const std::vector<double>& joint_angles,
                             double time = 0.0,
                             std::vector<double> masses = {}) {
  SnakeState state;
  state.link_masses = masses.empty()
                          ? std::vector<double>(robot.link_count, robot.link_mass)
                          : std::move(masses);
  state.joint_angles = joint_angles;
  state.heading = heading;
  state.time = time;
  const auto chain = detail::build_chain(joint_angles, robot.link_length);
  const auto chassis = detail::local_chassis(chain, state.link_masses);
  const Eigen::Matrix3d W = rot_z(heading) * chassis.axes.transpose();
  state.link_positions.resize(robot.link_count);
  for (int i = 0; i < robot.link_count; ++i) {
    state.link_positions[i] = com + W * (chain.centers[i] - chassis.origin);
  }
  return state;
}

inline SnakeState make_rest_state(const RobotParams& robot, const Point3& com,
                                  double heading, double time = 0.0) {
  return make_state(robot, com, heading,
                    std::vector<double>(robot.joint_count(), 0.0), time);
}

/// Advances the state by dt: joint angles from the gait wave, COM from the
/// displacement model, link positions rebuilt about the advanced COM frame.
inline SnakeState step_state(const SnakeState& state, const GaitParams& params,
                             double dt, const RobotParams& robot) {
  if (!(dt > 0.0) || dt > robot.max_step_dt + 1e-12) {
    throw Error("step_state: dt " + std::to_string(dt) +
                " outside (0, " + std::to_string(robot.max_step_dt) + "]");
  }
  const double t_new = state.time + dt;
  const auto angles =
      gait_joint_angles(params, t_new, robot.joint_count(), robot.vertical_ratio);
  for (double a : angles) {
    if (std::abs(a) > robot.joint_limit + 1e-12) {
      throw JointLimit("step_state: commanded angle " + std::to_string(a) +
                       " exceeds limit " + std::to_string(robot.joint_limit));
    }
  }
  const Point3 com_new =
      compute_com(state) +
      predict_com_displacement(params, state.heading, dt, robot.k, robot.beta);
  return make_state(robot, com_new, state.heading, angles, t_new,
                    state.link_masses);
}

/// Slews heading toward `target` at most `max_rate` rad/s over dt.
inline double servo_heading(double heading, double target, double max_rate,
                            double dt) {
  const double err = wrap_angle(target - heading);
  const double step = std::clamp(err, -max_rate * dt, max_rate * dt);
  return wrap_angle(heading + step);
}

}  // namespace cobra
