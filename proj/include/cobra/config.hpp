#pragma once

#include <json.hpp>

#include <fstream>
#include <string>

#include "cobra/geometry.hpp"
#include "cobra/metrics.hpp"
#include "cobra/perception.hpp"
#include "cobra/planner.hpp"
#include "cobra/sched.hpp"
#include "cobra/snake.hpp"

namespace cobra {

using json = nlohmann::json;

namespace detail {

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

inline Point3 get_point(const json& j, const char* key, const Point3& fallback,
                        bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError(key, "missing required field");
    return fallback;
  }
  const auto& a = j.at(key);
  if (!a.is_array() || (a.size() != 2 && a.size() != 3)) {
    throw ConfigError(key, "expected [x, y] or [x, y, z]");
  }
  Point3 p(a[0].get<double>(), a[1].get<double>(),
           a.size() == 3 ? a[2].get<double>() : 0.0);
  return p;
}

}  // namespace detail

/// Planner knobs used by the mission loop.
struct PlannerConfig {
  Eigen::Vector3d gait_min{0.0, 0.5, 0.0};
  Eigen::Vector3d gait_max{0.7, 4.0 * kPi, kPi};
  int waypoints = 4;
  double v_des = 0.13;  // m/s commanded approach speed
  SolverOptions solver;
};

/// Mission tuning: trigger distances and the docking gait schedule.
struct MissionTuning {
  double approach_standoff = 0.45;     // m in front of the plate
  double dock_trigger = 0.5;           // m, APPROACH -> DOCKING gate
  double latch_distance = 0.02;        // m, physical latch engagement
  double latch_angle_deg = 10.0;       // deg, heading vs plate normal
  double align_tolerance_deg = 2.0;    // ALIGN exit
  double reposition_tolerance_deg = 3.0;
  double search_yaw_rate = 0.4;        // rad/s scan speed
  double target_loss_timeout = 1.5;    // s without a pose before SEARCH
  double creep_amplitude = 0.1;        // FINAL_APPROACH gait cap
  double creep_floor = 0.02;           // FINAL_APPROACH gait floor
  double creep_ramp = 1.0;             // a = clamp(ramp * distance, ...)
  double carrot_gain = 0.5;            // axis carrot fraction
  // Head-to-target range below which fresh estimates are ignored: closer
  // than this the plate overfills the FOV and the depth min-range clamps,
  // so the terminal approach dead-reckons on the last good estimate.
  double est_freeze_range = 0.55;
  // Reject estimates farther than this from the median of the recent raw
  // stream (bbox corners that catch ground pixels yank the centroid by
  // meters when the camera rolls with the gait).
  double innovation_gate = 0.3;
  GaitParams initial_gait{0.5, 2.0 * kPi, 2.0 * kPi / 3.0};
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double time_budget = 420.0;  // simulated seconds
  Point3 goal = Point3::Zero();
  double goal_tolerance = 0.15;
  bool start_latched = false;

  RobotParams robot;
  Point3 robot_start = Point3::Zero();
  double robot_heading = 0.0;

  Vec3 box_dims{0.4, 0.4, 0.4};
  Point3 box_position{4.5, 0.0, 0.12};  // resting on the ground plane
  double box_yaw = kPi;
  double module_width = 0.4;
  double module_height = 0.16;
  double module_offset = 0.02;
  double module_z_offset = -0.12;  // plate centered at the robot's head plane
  double ground_z = -0.08;

  CameraIntrinsics camera{215.0, 215.0, 212.0, 120.0, 424, 240};
  ScheduleConfig rates;
  NoiseSpec noise;
  PerceptionConfig perception;
  PlannerConfig planner;
  MissionTuning tuning;

  void validate() const {
    robot.validate();
    camera.validate();
    rates.validate();
    perception.validate();
    if (!(time_budget > 0)) throw ConfigError("time_budget", "must be > 0");
    if (!(goal_tolerance > 0)) throw ConfigError("goal_tolerance", "must be > 0");
  }
};

inline ScenarioConfig scenario_from_json(const json& j) {
  using detail::get_or;
  using detail::get_point;
  ScenarioConfig cfg;
  cfg.goal = get_point(j, "goal", cfg.goal, /*required=*/true);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.time_budget = get_or(j, "time_budget", cfg.time_budget);
  cfg.goal_tolerance = get_or(j, "goal_tolerance", cfg.goal_tolerance);
  cfg.start_latched = get_or(j, "start_latched", cfg.start_latched);

  if (j.contains("robot")) {
    const auto& r = j.at("robot");
    cfg.robot.link_count = get_or(r, "link_count", cfg.robot.link_count);
    cfg.robot.link_length = get_or(r, "link_length", cfg.robot.link_length);
    cfg.robot.link_mass = get_or(r, "link_mass", cfg.robot.link_mass);
    cfg.robot.joint_limit = get_or(r, "joint_limit", cfg.robot.joint_limit);
    cfg.robot.k = get_or(r, "k", cfg.robot.k);
    cfg.robot.beta = get_or(r, "beta", cfg.robot.beta);
    cfg.robot.max_heading_rate =
        get_or(r, "max_heading_rate", cfg.robot.max_heading_rate);
    cfg.robot.vertical_ratio =
        get_or(r, "vertical_ratio", cfg.robot.vertical_ratio);
    cfg.robot_start = get_point(r, "start", cfg.robot_start);
    cfg.robot_heading = get_or(r, "heading", cfg.robot_heading);
    if (r.contains("camera_offset")) {
      cfg.robot.camera_offset = get_point(r, "camera_offset", cfg.robot.camera_offset);
    }
  }

  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    cfg.box_position = get_point(s, "box_position", cfg.box_position);
    if (s.contains("box_dims")) {
      cfg.box_dims = get_point(s, "box_dims", cfg.box_dims);
    }
    cfg.box_yaw = get_or(s, "box_yaw", cfg.box_yaw);
    cfg.module_width = get_or(s, "module_width", cfg.module_width);
    cfg.module_height = get_or(s, "module_height", cfg.module_height);
    cfg.module_offset = get_or(s, "module_offset", cfg.module_offset);
    cfg.module_z_offset = get_or(s, "module_z_offset", cfg.module_z_offset);
    cfg.ground_z = get_or(s, "ground_z", cfg.ground_z);
  }

  if (j.contains("camera")) {
    const auto& c = j.at("camera");
    cfg.camera.fx = get_or(c, "fx", cfg.camera.fx);
    cfg.camera.fy = get_or(c, "fy", cfg.camera.fy);
    cfg.camera.cx = get_or(c, "cx", cfg.camera.cx);
    cfg.camera.cy = get_or(c, "cy", cfg.camera.cy);
    cfg.camera.width = get_or(c, "width", cfg.camera.width);
    cfg.camera.height = get_or(c, "height", cfg.camera.height);
  }

  if (j.contains("rates")) {
    const auto& r = j.at("rates");
    cfg.rates.rgb = get_or(r, "rgb", cfg.rates.rgb);
    cfg.rates.depth = get_or(r, "depth", cfg.rates.depth);
    cfg.rates.detect = get_or(r, "detect", cfg.rates.detect);
    cfg.rates.control = get_or(r, "control", cfg.rates.control);
    cfg.rates.replan = get_or(r, "replan", cfg.rates.replan);
    cfg.perception.rgb_rate = cfg.rates.rgb;
    cfg.perception.depth_rate = cfg.rates.depth;
    cfg.perception.detect_rate = cfg.rates.detect;
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    cfg.noise.depth_sigma = get_or(n, "depth_sigma", cfg.noise.depth_sigma);
    cfg.noise.bbox_jitter_px = get_or(n, "bbox_jitter_px", cfg.noise.bbox_jitter_px);
    cfg.noise.miss_rate = get_or(n, "miss_rate", cfg.noise.miss_rate);
    cfg.noise.false_positive_rate =
        get_or(n, "false_positive_rate", cfg.noise.false_positive_rate);
    cfg.noise.pose_sigma_pos = get_or(n, "pose_sigma_pos", cfg.noise.pose_sigma_pos);
    cfg.noise.pose_sigma_rot_deg =
        get_or(n, "pose_sigma_rot_deg", cfg.noise.pose_sigma_rot_deg);
  }

  if (j.contains("perception")) {
    const auto& p = j.at("perception");
    cfg.perception.min_confidence =
        get_or(p, "min_confidence", cfg.perception.min_confidence);
    cfg.perception.roi_shrink = get_or(p, "roi_shrink", cfg.perception.roi_shrink);
    const std::string mode = get_or<std::string>(p, "mode", "point-pca");
    if (mode == "point-pca") {
      cfg.perception.mode = OrientationMode::PointPca;
    } else if (mode == "normal-svd") {
      cfg.perception.mode = OrientationMode::NormalSvd;
    } else {
      throw ConfigError("perception.mode", "must be 'point-pca' or 'normal-svd'");
    }
  }

  if (j.contains("planner")) {
    const auto& p = j.at("planner");
    cfg.planner.waypoints = get_or(p, "waypoints", cfg.planner.waypoints);
    cfg.planner.v_des = get_or(p, "v_des", cfg.planner.v_des);
    if (p.contains("gait_min")) {
      const auto g = detail::get_point(p, "gait_min", cfg.planner.gait_min);
      cfg.planner.gait_min = g;
    }
    if (p.contains("gait_max")) {
      const auto g = detail::get_point(p, "gait_max", cfg.planner.gait_max);
      cfg.planner.gait_max = g;
    }
    cfg.planner.solver.max_inner =
        get_or(p, "max_inner", cfg.planner.solver.max_inner);
    cfg.planner.solver.feasibility_tol =
        get_or(p, "feasibility_tol", cfg.planner.solver.feasibility_tol);
  }

  if (j.contains("tuning")) {
    const auto& t = j.at("tuning");
    auto& m = cfg.tuning;
    m.approach_standoff = get_or(t, "approach_standoff", m.approach_standoff);
    m.dock_trigger = get_or(t, "dock_trigger", m.dock_trigger);
    m.latch_distance = get_or(t, "latch_distance", m.latch_distance);
    m.latch_angle_deg = get_or(t, "latch_angle_deg", m.latch_angle_deg);
    m.search_yaw_rate = get_or(t, "search_yaw_rate", m.search_yaw_rate);
    m.target_loss_timeout = get_or(t, "target_loss_timeout", m.target_loss_timeout);
    m.creep_amplitude = get_or(t, "creep_amplitude", m.creep_amplitude);
    m.creep_floor = get_or(t, "creep_floor", m.creep_floor);
    m.creep_ramp = get_or(t, "creep_ramp", m.creep_ramp);
    m.carrot_gain = get_or(t, "carrot_gain", m.carrot_gain);
    if (t.contains("initial_gait")) {
      const auto g = detail::get_point(t, "initial_gait", Point3::Zero());
      m.initial_gait = GaitParams{g.x(), g.y(), g.z()};
    }
  }

  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  return scenario_from_json(detail::load_json_file(path));
}

/// Plan subcommand input: a standalone NLP instance.
inline PlanProblem plan_problem_from_json(const json& j) {
  using detail::get_or;
  using detail::get_point;
  if (!j.contains("desired")) throw ConfigError("desired", "missing required field");
  std::vector<Point3> desired;
  for (const auto& w : j.at("desired")) {
    if (!w.is_array() || w.size() < 2) {
      throw ConfigError("desired", "each waypoint must be [x, y] or [x, y, 0]");
    }
    desired.push_back({w[0].get<double>(), w[1].get<double>(), 0.0});
  }
  const Point3 start = get_point(j, "start_com", Point3::Zero());
  const double heading = get_or(j, "heading", 0.0);
  const Point3 g0 = get_point(j, "initial_gait", Point3(0.5, 2.0 * kPi, kPi / 3));
  const Point3 gmin = get_point(j, "gait_min", Point3(0.0, 0.5, 0.0));
  const Point3 gmax = get_point(j, "gait_max", Point3(1.0, 4.0 * kPi, kPi));
  const double k = get_or(j, "k", 0.02);
  const double beta = get_or(j, "beta", 0.0);
  auto p = make_plan_problem(start, heading, desired, g0.x(), g0.y(), g0.z(),
                             gmin, gmax, get_or(j, "waypoint_span", 50.0), k, beta);
  if (j.contains("dt_wp")) {
    p.dt_wp = j.at("dt_wp").get<double>();
    // Re-roll the feasible start for the explicit spacing.
    const auto roll = rollout_waypoints(p, g0.x(), g0.y(), g0.z());
    for (int i = 0; i < p.waypoint_count(); ++i) {
      p.x0.segment<3>(3 + 3 * i) = roll[i];
    }
  }
  return p;
}

inline PlanProblem load_plan_problem(const std::string& path) {
  return plan_problem_from_json(detail::load_json_file(path));
}

// Detection interchange: array of {image_id, class, bbox, confidence}.
inline DetectionSet detection_set_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("detections", "expected a JSON array");
  DetectionSet set;
  for (const auto& e : j) {
    if (!e.contains("image_id")) throw ConfigError("image_id", "missing required field");
    if (!e.contains("bbox")) throw ConfigError("bbox", "missing required field");
    const auto& b = e.at("bbox");
    if (!b.is_array() || b.size() != 4) {
      throw ConfigError("bbox", "expected [u_min, v_min, u_max, v_max]");
    }
    BoundingBox box;
    box.u_min = b[0].get<double>();
    box.v_min = b[1].get<double>();
    box.u_max = b[2].get<double>();
    box.v_max = b[3].get<double>();
    box.class_id = object_class_from_name(
        detail::get_or<std::string>(e, "class", "box"));
    box.confidence = detail::get_or(e, "confidence", 1.0);
    box.validate();
    set.images[e.at("image_id").get<int>()].push_back(box);
  }
  return set;
}

inline DetectionSet load_detection_set(const std::string& path) {
  return detection_set_from_json(detail::load_json_file(path));
}

inline json metrics_report_to_json(const MetricsReport& report) {
  json j;
  j["iou_threshold"] = report.iou_threshold;
  j["map"] = report.map;
  json classes = json::object();
  for (const auto& [cls, cm] : report.per_class) {
    json c;
    c["tp"] = cm.tp;
    c["fp"] = cm.fp;
    c["fn"] = cm.fn;
    c["gt_count"] = cm.gt_count;
    c["precision"] = cm.precision;
    c["recall"] = cm.recall ? json(*cm.recall) : json(nullptr);
    c["ap"] = cm.ap ? json(*cm.ap) : json(nullptr);
    classes[object_class_name(cls)] = c;
  }
  j["classes"] = classes;
  return j;
}

}  // namespace cobra
