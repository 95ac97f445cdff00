#pragma once

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "cobra/config.hpp"
#include "cobra/mathutil.hpp"
#include "cobra/mission_log.hpp"
#include "cobra/perception.hpp"
#include "cobra/planner.hpp"
#include "cobra/render.hpp"
#include "cobra/sched.hpp"

namespace cobra {

/// Closed-loop mission: multi-rate sensing, detection, pose estimation,
/// replanning and gait stepping, with the SEARCH .. DONE state machine.
class MissionRunner {
 public:
  explicit MissionRunner(const ScenarioConfig& cfg)
      : cfg_(cfg),
        scheduler_(cfg.rates),
        rng_depth_(cfg.seed ^ 0x9e3779b97f4a7c15ull),
        rng_pose_(cfg.seed ^ 0x2545f4914f6cdd1dull) {
    cfg_.validate();
    scene_.box_pose.frame = Frame::World;
    scene_.box_pose.rotation = rot_z(cfg.box_yaw);
    scene_.box_pose.position = cfg.box_position;
    scene_.box_dims = cfg.box_dims;
    scene_.module_width = cfg.module_width;
    scene_.module_height = cfg.module_height;
    scene_.module_offset = cfg.module_offset;
    scene_.module_z_offset = cfg.module_z_offset;
    scene_.ground_z = cfg.ground_z;
    scene_.goal = cfg.goal;
    scene_.robot = make_state(
        cfg.robot, {cfg.robot_start.x(), cfg.robot_start.y(), 0.0},
        cfg.robot_heading,
        std::vector<double>(cfg.robot.joint_count(), 0.0));
    gait_ = GaitParams{0.0, cfg.tuning.initial_gait.omega,
                       cfg.tuning.initial_gait.phi};
    heading_target_ = cfg.robot_heading;

    detector_ = std::make_unique<OracleDetector>(
        [this](double) -> const SceneState& { return rgb_snap_.scene; },
        [this](double) { return rgb_snap_.camera; }, cfg_.camera, cfg_.noise,
        cfg_.seed ^ 0xda3e39cb94b95bdbull);

    if (cfg_.start_latched) {
      engage_latch();
      phase_ = MissionPhase::Transport;
    }
    log_.summary.seed = cfg_.seed;
  }

  /// Runs to DONE or throws ScenarioTimeout (the partial log stays
  /// accessible through log()).
  MissionLog run() {
    const double dt = 1.0 / cfg_.rates.control;
    while (phase_ != MissionPhase::Done) {
      const auto tick = scheduler_.next();
      if (tick.time > cfg_.time_budget) {
        finalize(tick.time);
        throw ScenarioTimeout("mission not DONE within " +
                              std::to_string(cfg_.time_budget) + " s");
      }
      switch (tick.kind) {
        case StreamKind::Control: control_tick(tick.time, dt); break;
        case StreamKind::Depth: depth_tick(tick.time); break;
        case StreamKind::Rgb: rgb_tick(tick.time); break;
        case StreamKind::Detect: detect_tick(tick.time); break;
        case StreamKind::Replan: replan_tick(tick.time); break;
      }
    }
    finalize(done_time_);
    return log_;
  }

  const MissionLog& log() const { return log_; }
  const SceneState& scene() const { return scene_; }

 private:
  struct Snapshot {
    bool valid = false;
    double time = 0.0;
    Pose6DoF camera;
    SceneState scene;
  };

  Pose6DoF camera_now() const {
    return head_camera_pose(scene_.robot, cfg_.robot);
  }

  /// Plate normal disambiguated toward the observer: the estimator's z sign
  /// follows a temporal chain that garbage frames can flip, but the side the
  /// robot approaches from is unambiguous.
  static Vec3 plate_normal_toward(const Pose6DoF& plate, const Point3&观) = delete;
  static Vec3 plate_normal_toward_impl();

  /// Component-wise median of the recent raw estimate positions.
  Point3 recent_median() const {
    Point3 med;
    std::vector<double> v(recent_raw_.size());
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < recent_raw_.size(); ++i) v[i] = recent_raw_[i](c);
      const auto mid = v.begin() + v.size() / 2;
      std::nth_element(v.begin(), mid, v.end());
      med(c) = *mid;
    }
    return med;
  }

  Point3 head_position() const {
    return head_pose(scene_.robot, cfg_.robot).position;
  }

  void engage_latch() {
    const Pose6DoF head = head_pose(scene_.robot, cfg_.robot);
    latch_rotation_ = head.rotation.transpose() * scene_.box_pose.rotation;
    latch_offset_ =
        head.rotation.transpose() * (scene_.box_pose.position - head.position);
    scene_.latched = true;
  }

  void carry_box() {
    const Pose6DoF head = head_pose(scene_.robot, cfg_.robot);
    scene_.box_pose.rotation = head.rotation * latch_rotation_;
    scene_.box_pose.position = head.position + head.rotation * latch_offset_;
  }

  void release_box() {
    scene_.latched = false;
    // Kinematic settle: the box drops flat onto the ground, keeping its yaw.
    const Vec3 bx = scene_.box_pose.rotation.col(0);
    const double yaw = std::atan2(bx.y(), bx.x());
    scene_.box_pose.rotation = rot_z(yaw);
    scene_.box_pose.position.z() = scene_.ground_z + scene_.box_dims.z() / 2.0;
  }

  void enter(MissionPhase next, double t) {
    phase_ = next;
    phase_since_ = t;
  }

  // --- control at 500 Hz ----------------------------------------------------

  void control_tick(double t, double dt) {
    double servo_rate = cfg_.robot.max_heading_rate;
    const Point3 head = head_position();
    const Point3 com = compute_com(scene_.robot);

    switch (phase_) {
      case MissionPhase::Search: {
        gait_.a = 0.0;
        heading_target_ = scene_.robot.heading + 1.0;  // continuous scan
        servo_rate = cfg_.tuning.search_yaw_rate;
        if (est_world_ && t - last_est_time_ <= cfg_.tuning.target_loss_timeout) {
          enter(MissionPhase::Approach, t);
          gait_ = cfg_.tuning.initial_gait;
        }
        break;
      }
      case MissionPhase::Approach: {
        if (t - last_est_time_ > cfg_.tuning.target_loss_timeout) {
          est_world_.reset();
          est_camera_.reset();
          recent_raw_.clear();
          enter(MissionPhase::Search, t);
          break;
        }
        const Point3 standoff =
            est_world_->position +
            plate_normal_toward(*est_world_, head) * cfg_.tuning.approach_standoff;
        heading_target_ = std::atan2(standoff.y() - head.y(), standoff.x() - head.x());
        const double dist = (head - est_world_->position).norm();
        if (dist < cfg_.tuning.dock_trigger) {
          try {
            dock_script_ = make_docking_script(*est_world_, scene_.robot,
                                               cfg_.robot, dock_env());
            dock_phase_ = 0;
            enter(MissionPhase::Docking, t);
            phase_since_dock_ = t;
          } catch (const OutOfEnvelope&) {
            // Keep closing on the standoff point until the geometry admits
            // a script.
          }
        }
        break;
      }
      case MissionPhase::Docking: {
        docking_control(t, head);
        break;
      }
      case MissionPhase::Reposition: {
        gait_.a = 0.0;
        heading_target_ = std::atan2(scene_.goal.y() - com.y(),
                                     scene_.goal.x() - com.x());
        const double err =
            std::abs(wrap_angle(heading_target_ - scene_.robot.heading));
        if (err < deg2rad(cfg_.tuning.reposition_tolerance_deg)) {
          enter(MissionPhase::Transport, t);
          gait_ = cfg_.tuning.initial_gait;
        }
        break;
      }
      case MissionPhase::Transport: {
        const Vec3 to_goal = scene_.goal - scene_.box_pose.position;
        heading_target_ = std::atan2(to_goal.y(), to_goal.x());
        if (to_goal.head<2>().norm() < cfg_.goal_tolerance) {
          if (scene_.latched) release_box();
          done_time_ = t;
          enter(MissionPhase::Done, t);
        }
        break;
      }
      case MissionPhase::Done:
        return;
    }

    if (phase_ == MissionPhase::Done) {
      log_row(t);
      return;
    }

    scene_.robot.heading =
        servo_heading(scene_.robot.heading, heading_target_, servo_rate, dt);
    scene_.robot = step_state(scene_.robot, gait_, dt, cfg_.robot);
    if (scene_.latched) carry_box();
    phase_time_[phase_] += dt;
    log_row(t);
  }

  DockingEnvelope dock_env() const {
    DockingEnvelope env;
    env.max_distance = cfg_.tuning.dock_trigger;
    env.creep = GaitParams{cfg_.tuning.creep_amplitude,
                           cfg_.tuning.initial_gait.omega,
                           cfg_.tuning.initial_gait.phi};
    env.align_rate = cfg_.robot.max_heading_rate;
    return env;
  }

  void docking_control(double t, const Point3& head) {
    // Physical latch gate against ground truth.
    const Pose6DoF truth = scene_.module_pose();
    const double true_dist = (head - truth.position).norm();
    const Vec3 heading_dir(std::cos(scene_.robot.heading),
                           std::sin(scene_.robot.heading), 0.0);
    const double approach_angle = vector_angle(heading_dir, -truth.axis_z());
    if (true_dist < cfg_.tuning.latch_distance &&
        approach_angle < deg2rad(cfg_.tuning.latch_angle_deg)) {
      engage_latch();
      enter(MissionPhase::Reposition, t);
      gait_.a = 0.0;
      return;
    }

    const Pose6DoF& est = est_world_ ? *est_world_ : truth;
    const double d = (head - est.position).norm();
    const DockPhase* ph =
        dock_phase_ < dock_script_.phases.size() ? &dock_script_.phases[dock_phase_]
                                                 : nullptr;
    const bool aligning = ph && ph->kind == DockPhaseKind::Align;
    if (aligning) {
      gait_.a = 0.0;
      heading_target_ = std::atan2(est.position.y() - head.y(),
                                   est.position.x() - head.x());
      const double err =
          std::abs(wrap_angle(heading_target_ - scene_.robot.heading));
      if (err < deg2rad(cfg_.tuning.align_tolerance_deg) ||
          t - phase_since_dock_ > ph->duration + 1.0) {
        ++dock_phase_;
        phase_since_dock_ = t;
      }
      return;
    }

    // FINAL_APPROACH behavior (also the fallback when the script ran out):
    // creep along the plate axis with a distance-proportional amplitude.
    const GaitParams creep = dock_env().creep;
    gait_.omega = creep.omega;
    gait_.phi = creep.phi;
    gait_.a = std::clamp(cfg_.tuning.creep_ramp * d, cfg_.tuning.creep_floor,
                         creep.a);
    const Point3 carrot =
        est.position + est.axis_z() * (cfg_.tuning.carrot_gain * d);
    heading_target_ = std::atan2(carrot.y() - head.y(), carrot.x() - head.x());

    if (ph && t - phase_since_dock_ > ph->duration) {
      if (ph->kind == DockPhaseKind::FinalApproach) {
        // Approach window expired: re-script from the current estimate when
        // the geometry allows, otherwise keep creeping.
        try {
          dock_script_ = make_docking_script(est, scene_.robot, cfg_.robot,
                                             dock_env());
          dock_phase_ = 0;
        } catch (const OutOfEnvelope&) {
        }
        phase_since_dock_ = t;
      } else {
        ++dock_phase_;
        phase_since_dock_ = t;
      }
    }
  }

  // --- sensing ---------------------------------------------------------------

  void depth_tick(double t) {
    depth_snap_.valid = true;
    depth_snap_.time = t;
    depth_snap_.camera = camera_now();
    depth_snap_.camera.timestamp = t;
    depth_snap_.scene = scene_;
    depth_frame_fresh_ = false;
  }

  void rgb_tick(double t) {
    rgb_snap_.valid = true;
    rgb_snap_.time = t;
    rgb_snap_.camera = camera_now();
    rgb_snap_.camera.timestamp = t;
    rgb_snap_.scene = scene_;
  }

  Pose6DoF noisy_camera(const Pose6DoF& truth) {
    if (cfg_.noise.pose_sigma_pos <= 0.0 && cfg_.noise.pose_sigma_rot_deg <= 0.0) {
      return truth;
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    Pose6DoF out = truth;
    if (cfg_.noise.pose_sigma_pos > 0.0) {
      out.position += cfg_.noise.pose_sigma_pos *
                      Vec3(gauss(rng_pose_), gauss(rng_pose_), gauss(rng_pose_));
    }
    if (cfg_.noise.pose_sigma_rot_deg > 0.0) {
      const double s = deg2rad(cfg_.noise.pose_sigma_rot_deg);
      out.rotation = out.rotation * rot_x(s * gauss(rng_pose_)) *
                     rot_y(s * gauss(rng_pose_)) * rot_z(s * gauss(rng_pose_));
    }
    return out;
  }

  void detect_tick(double t) {
    ++log_.summary.detect_ticks;
    if (!rgb_snap_.valid || !depth_snap_.valid) return;
    if (rgb_snap_.time - depth_snap_.time >= 1.0 / cfg_.rates.depth) return;

    if (!depth_frame_fresh_) {
      depth_frame_ = render_depth(depth_snap_.scene, depth_snap_.camera,
                                  cfg_.camera, cfg_.noise.depth_sigma, rng_depth_);
      depth_frame_fresh_ = true;
    }
    const RgbFrame rgb{cfg_.camera, rgb_snap_.time, {}};
    // The cloud lives in the depth camera's frame; the VIO stand-in perturbs
    // that pose.
    const Pose6DoF cam_est = noisy_camera(depth_snap_.camera);
    const PoseEstimate est = estimate_module_pose(
        rgb, depth_frame_, *detector_, est_camera_, cam_est, cfg_.perception);

    PoseLogRow row;
    row.time = t;
    row.ok = static_cast<bool>(est);
    row.reason = est.reason;
    row.truth = rgb_snap_.scene.module_pose();
    if (est) {
      row.estimate = *est.world;
      row.position_error = (est.world->position - row.truth.position).norm();
      row.z_angle_error_deg =
          rad2deg(vector_angle(est.world->axis_z(), row.truth.axis_z()));
      recent_raw_.push_back(est.world->position);
      if (recent_raw_.size() > 5) recent_raw_.pop_front();
      // Inside the freeze range the plate overfills the FOV and the depth
      // min-range clamps; keep the last trustworthy estimate instead.
      const bool frozen =
          est_world_ && (head_position() - est_world_->position).norm() <
                            cfg_.tuning.est_freeze_range;
      const bool consistent =
          recent_raw_.size() < 3 ||
          (est.world->position - recent_median()).norm() <
              cfg_.tuning.innovation_gate;
      row.used = !frozen && consistent;
      if (row.used) {
        est_world_ = est.world;
        est_camera_ = est.camera;
      }
      last_est_time_ = t;  // seen, even if too close or gated
      ++log_.summary.pose_count;
    }
    log_.poses.push_back(row);
  }

  void replan_tick(double t) {
    if (phase_ != MissionPhase::Approach && phase_ != MissionPhase::Transport) {
      return;
    }
    const Point3 com = compute_com(scene_.robot);
    Vec3 target_disp = Vec3::Zero();
    if (phase_ == MissionPhase::Approach) {
      if (!est_world_) return;
      const Point3 standoff = est_world_->position +
                              est_world_->axis_z() * cfg_.tuning.approach_standoff;
      target_disp = standoff - head_position();
    } else {
      target_disp = scene_.goal - scene_.box_pose.position;
    }
    target_disp.z() = 0.0;
    const double dist = target_disp.norm();
    if (dist < 1e-6) return;
    const Vec3 dir = target_disp / dist;

    const auto& pc = cfg_.planner;
    const double a0 = std::clamp(gait_.a > 0.01 ? gait_.a : cfg_.tuning.initial_gait.a,
                                 pc.gait_min.x(), pc.gait_max.x());
    const double w0 = std::clamp(gait_.omega, pc.gait_min.y(), pc.gait_max.y());
    const double p0 = std::clamp(gait_.phi, pc.gait_min.z(), pc.gait_max.z());
    const double dt_wp = 2.0 * kPi / w0;
    std::vector<Point3> desired;
    for (int i = 1; i <= pc.waypoints; ++i) {
      const double s = std::min(i * pc.v_des * dt_wp, dist);
      desired.push_back(Point3(com.x(), com.y(), 0.0) + s * dir);
    }
    auto problem = make_plan_problem({com.x(), com.y(), 0.0},
                                     scene_.robot.heading, desired, a0, w0, p0,
                                     pc.gait_min, pc.gait_max, 50.0,
                                     cfg_.robot.k, cfg_.robot.beta);
    PlanLogRow row;
    row.time = t;
    try {
      const PlanSolution sol = solve(problem, pc.solver);
      gait_ = GaitParams{PlanProblem::a_of(sol.x_star),
                         PlanProblem::omega_of(sol.x_star), sol.x_star(2)};
      row.iterations = sol.iterations;
      row.converged = sol.converged;
      row.cost = sol.cost;
      row.residual = sol.constraint_residual;
    } catch (const Infeasible& e) {
      row.converged = false;
      row.residual = e.max_residual;
    }
    row.gait = gait_;
    log_.plans.push_back(row);
  }

  // --- logging ---------------------------------------------------------------

  void log_row(double t) {
    MissionLogRow row;
    row.time = t;
    row.phase = phase_;
    row.com = compute_com(scene_.robot);
    row.heading = scene_.robot.heading;
    row.head = head_position();
    row.box = scene_.box_pose.position;
    row.latched = scene_.latched;
    row.gait = gait_;
    log_.mission.push_back(row);
  }

  void finalize(double t) {
    log_.summary.done = phase_ == MissionPhase::Done;
    log_.summary.mission_time = t;
    log_.summary.final_box_error = (scene_.box_pose.position - scene_.goal).norm();
    for (const auto& [phase, secs] : phase_time_) {
      log_.summary.phase_durations[mission_phase_name(phase)] = secs;
    }
  }

  ScenarioConfig cfg_;
  SceneState scene_;
  MultiRateScheduler scheduler_;
  std::mt19937_64 rng_depth_;
  std::mt19937_64 rng_pose_;
  std::unique_ptr<OracleDetector> detector_;

  MissionPhase phase_ = MissionPhase::Search;
  double phase_since_ = 0.0;
  GaitParams gait_;
  double heading_target_ = 0.0;

  std::optional<Pose6DoF> est_world_;
  std::optional<Pose6DoF> est_camera_;
  std::deque<Point3> recent_raw_;
  double last_est_time_ = -1e9;

  DockingScript dock_script_;
  std::size_t dock_phase_ = 0;
  double phase_since_dock_ = 0.0;

  Eigen::Matrix3d latch_rotation_ = Eigen::Matrix3d::Identity();
  Vec3 latch_offset_ = Vec3::Zero();

  Snapshot depth_snap_;
  Snapshot rgb_snap_;
  DepthFrame depth_frame_;
  bool depth_frame_fresh_ = false;

  double done_time_ = 0.0;
  std::map<MissionPhase, double> phase_time_;
  MissionLog log_;
};

/// Runs the configured scenario to completion; throws ScenarioTimeout when the
/// simulated-time budget expires first.
inline MissionLog run_scenario(const ScenarioConfig& cfg) {
  MissionRunner runner(cfg);
  return runner.run();
}

}  // namespace cobra
