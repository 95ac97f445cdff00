#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cobra/geometry.hpp"
#include "cobra/perception.hpp"
#include "cobra/snake.hpp"

namespace cobra {

enum class MissionPhase : std::uint8_t {
  Search,
  Approach,
  Docking,
  Reposition,
  Transport,
  Done,
};

inline const char* mission_phase_name(MissionPhase p) {
  switch (p) {
    case MissionPhase::Search: return "SEARCH";
    case MissionPhase::Approach: return "APPROACH";
    case MissionPhase::Docking: return "DOCKING";
    case MissionPhase::Reposition: return "REPOSITION";
    case MissionPhase::Transport: return "TRANSPORT";
    case MissionPhase::Done: return "DONE";
  }
  return "?";
}

struct MissionLogRow {
  double time = 0.0;
  MissionPhase phase = MissionPhase::Search;
  Point3 com = Point3::Zero();
  double heading = 0.0;
  Point3 head = Point3::Zero();
  Point3 box = Point3::Zero();
  bool latched = false;
  GaitParams gait;
};

struct PoseLogRow {
  double time = 0.0;
  bool ok = false;
  bool used = false;  // fed to the controller (far enough to trust)
  EstimateReason reason = EstimateReason::NoDetection;
  Pose6DoF estimate;
  Pose6DoF truth;
  double position_error = 0.0;
  double z_angle_error_deg = 0.0;
};

struct PlanLogRow {
  double time = 0.0;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  double residual = 0.0;
  GaitParams gait;
};

struct MissionSummary {
  bool done = false;
  double mission_time = 0.0;
  double final_box_error = 0.0;
  std::map<std::string, double> phase_durations;
  int detect_ticks = 0;
  int pose_count = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void fmt(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline void fmt_rotation(std::string& out, const Eigen::Matrix3d& R) {
  // Row-major serialization.
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out += ',';
      fmt(out, R(r, c));
    }
  }
}

}  // namespace detail

struct MissionLog {
  std::vector<MissionLogRow> mission;
  std::vector<PoseLogRow> poses;
  std::vector<PlanLogRow> plans;
  MissionSummary summary;

  std::string mission_csv() const {
    std::string out =
        "time,phase,com_x,com_y,com_z,heading,head_x,head_y,head_z,"
        "box_x,box_y,box_z,latched,gait_a,gait_omega,gait_phi\n";
    for (const auto& r : mission) {
      detail::fmt(out, r.time);
      out += ',';
      out += mission_phase_name(r.phase);
      for (double v : {r.com.x(), r.com.y(), r.com.z(), r.heading, r.head.x(),
                       r.head.y(), r.head.z(), r.box.x(), r.box.y(), r.box.z()}) {
        out += ',';
        detail::fmt(out, v);
      }
      out += r.latched ? ",1" : ",0";
      for (double v : {r.gait.a, r.gait.omega, r.gait.phi}) {
        out += ',';
        detail::fmt(out, v);
      }
      out += '\n';
    }
    return out;
  }

  std::string pose_csv() const {
    std::string out =
        "time,ok,used,reason,est_x,est_y,est_z,"
        "est_r00,est_r01,est_r02,est_r10,est_r11,est_r12,est_r20,est_r21,est_r22,"
        "true_x,true_y,true_z,"
        "true_r00,true_r01,true_r02,true_r10,true_r11,true_r12,true_r20,true_r21,"
        "true_r22,pos_err,z_angle_err_deg\n";
    for (const auto& r : poses) {
      detail::fmt(out, r.time);
      out += r.ok ? ",1" : ",0";
      out += r.used ? ",1," : ",0,";
      out += estimate_reason_name(r.reason);
      for (double v : {r.estimate.position.x(), r.estimate.position.y(),
                       r.estimate.position.z()}) {
        out += ',';
        detail::fmt(out, v);
      }
      detail::fmt_rotation(out, r.estimate.rotation);
      for (double v :
           {r.truth.position.x(), r.truth.position.y(), r.truth.position.z()}) {
        out += ',';
        detail::fmt(out, v);
      }
      detail::fmt_rotation(out, r.truth.rotation);
      out += ',';
      detail::fmt(out, r.position_error);
      out += ',';
      detail::fmt(out, r.z_angle_error_deg);
      out += '\n';
    }
    return out;
  }

  std::string plan_csv() const {
    std::string out = "time,iterations,converged,cost,residual,a,omega,phi\n";
    for (const auto& r : plans) {
      detail::fmt(out, r.time);
      out += ',' + std::to_string(r.iterations);
      out += r.converged ? ",1" : ",0";
      for (double v : {r.cost, r.residual, r.gait.a, r.gait.omega, r.gait.phi}) {
        out += ',';
        detail::fmt(out, v);
      }
      out += '\n';
    }
    return out;
  }

  std::string summary_json() const {
    nlohmann::json j;
    j["done"] = summary.done;
    j["mission_time"] = summary.mission_time;
    j["final_box_error"] = summary.final_box_error;
    j["phase_durations"] = summary.phase_durations;
    j["detect_ticks"] = summary.detect_ticks;
    j["pose_count"] = summary.pose_count;
    j["seed"] = summary.seed;
    return j.dump(2) + "\n";
  }

  void write(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto put = [&dir](const std::string& name, const std::string& text) {
      std::ofstream out(fs::path(dir) / name, std::ios::binary);
      out << text;
    };
    put("mission_log.csv", mission_csv());
    put("pose_log.csv", pose_csv());
    put("plan_log.csv", plan_csv());
    put("summary.json", summary_json());
  }
};

}  // namespace cobra
