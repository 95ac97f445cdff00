#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cobra/errors.hpp"
#include "cobra/snake.hpp"

namespace cobra {

/// Decision vector layout: X = [a, omega, phi, P1.xyz, ..., Pn.xyz].
struct PlanProblem {
  Eigen::VectorXd x0;
  Eigen::VectorXd x_min;
  Eigen::VectorXd x_max;
  std::vector<Point3> desired;  // z = 0 on flat ground
  double dt_wp = 1.0;           // time between waypoints, s
  Point3 start_com = Point3::Zero();
  double heading = 0.0;
  double k = 0.02;
  double beta = 0.0;

  int waypoint_count() const { return static_cast<int>(desired.size()); }
  int dim() const { return 3 + 3 * waypoint_count(); }

  static double a_of(const Eigen::VectorXd& x) { return x(0); }
  static double omega_of(const Eigen::VectorXd& x) { return x(1); }
  static Point3 waypoint_of(const Eigen::VectorXd& x, int i) {
    return x.segment<3>(3 + 3 * i);
  }

  void validate() const {
    if (desired.empty()) throw ConfigError("plan.desired", "needs >= 1 waypoint");
    if (x0.size() != dim() || x_min.size() != dim() || x_max.size() != dim()) {
      throw DimensionMismatch("plan problem: vectors must have size " +
                              std::to_string(dim()));
    }
    for (int i = 0; i < dim(); ++i) {
      if (!(x_min(i) <= x0(i) && x0(i) <= x_max(i))) {
        throw ConfigError("plan.x0", "outside bounds at index " + std::to_string(i));
      }
    }
    for (const auto& d : desired) {
      if (d.z() != 0.0) throw ConfigError("plan.desired", "waypoints must have z = 0");
    }
    if (!(dt_wp > 0.0)) throw ConfigError("plan.dt_wp", "must be > 0");
  }
};

struct PlanSolution {
  Eigen::VectorXd x_star;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double constraint_residual = 0.0;  // max waypoint residual norm
};

struct SolveTraceRow {
  int iteration;
  double mu;
  double cost;
  double residual;
  double step_norm;
};

struct SolverOptions {
  double mu0 = 10.0;
  double mu_factor = 10.0;
  double mu_max = 1e6;
  int max_inner = 400;
  double step_tol = 1e-8;
  double fd_step = 1e-6;
  double armijo_c = 1e-4;
  int max_halvings = 40;
  double feasibility_tol = 1e-3;
  // Residuals at or below this count as feasible when ranking candidates.
  double accept_tol = 1e-6;
  std::vector<SolveTraceRow>* trace = nullptr;
};

/// Tracking cost: sum of squared deviations of the waypoint block from the
/// desired waypoints.
inline double cost(const Eigen::VectorXd& x, const PlanProblem& problem) {
  if (x.size() != problem.dim()) {
    throw DimensionMismatch("cost: decision vector has size " +
                            std::to_string(x.size()) + ", expected " +
                            std::to_string(problem.dim()));
  }
  double j = 0.0;
  for (int i = 0; i < problem.waypoint_count(); ++i) {
    j += (PlanProblem::waypoint_of(x, i) - problem.desired[i]).squaredNorm();
  }
  return j;
}

/// Analytic gradient of `cost`: 2 (P_i - des_i) on the waypoint block, zero
/// on the gait parameters.
inline Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x,
                                     const PlanProblem& problem) {
  if (x.size() != problem.dim()) {
    throw DimensionMismatch("cost_gradient: wrong decision vector size");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (int i = 0; i < problem.waypoint_count(); ++i) {
    g.segment<3>(3 + 3 * i) =
        2.0 * (PlanProblem::waypoint_of(x, i) - problem.desired[i]);
  }
  return g;
}

/// Kinematic-prediction residuals: the displacement model rolled forward from
/// start_com, minus the waypoint variables. Feasible iff all zero.
inline std::vector<Vec3> constraint_residual(const Eigen::VectorXd& x,
                                             const PlanProblem& problem) {
  if (x.size() != problem.dim()) {
    throw DimensionMismatch("constraint_residual: wrong decision vector size");
  }
  GaitParams gait{PlanProblem::a_of(x), PlanProblem::omega_of(x), x(2)};
  std::vector<Vec3> out(problem.waypoint_count());
  Point3 pred = problem.start_com;
  for (int i = 0; i < problem.waypoint_count(); ++i) {
    pred += predict_com_displacement(gait, problem.heading, problem.dt_wp,
                                     problem.k, problem.beta);
    out[i] = pred - PlanProblem::waypoint_of(x, i);
  }
  return out;
}

inline double max_residual_norm(const Eigen::VectorXd& x,
                                const PlanProblem& problem) {
  double r = 0.0;
  for (const auto& v : constraint_residual(x, problem)) {
    r = std::max(r, v.norm());
  }
  return r;
}

/// Waypoints produced by rolling the displacement model forward with the gait
/// parameters of x0; substituting them into the waypoint block makes the
/// problem feasible by construction.
inline std::vector<Point3> rollout_waypoints(const PlanProblem& problem,
                                             double a, double omega, double phi) {
  GaitParams gait{a, omega, phi};
  std::vector<Point3> out(problem.waypoint_count());
  Point3 pred = problem.start_com;
  for (int i = 0; i < problem.waypoint_count(); ++i) {
    pred += predict_com_displacement(gait, problem.heading, problem.dt_wp,
                                     problem.k, problem.beta);
    out[i] = pred;
  }
  return out;
}

namespace detail {

inline double penalized_objective(const Eigen::VectorXd& x,
                                  const PlanProblem& problem, double mu) {
  double phi = cost(x, problem);
  for (const auto& r : constraint_residual(x, problem)) {
    phi += mu * r.squaredNorm();
  }
  return phi;
}

}  // namespace detail

/// Penalty-method projected gradient descent on J(X) + mu * sum |r_i|^2 with
/// mu escalated by mu_factor per outer round. Gradients by central finite
/// differences; steps clamped to the bounds; Armijo backtracking line search.
/// Returns the best bounded iterate: among the round-end candidates that are
/// as feasible as the most feasible one found, the cheapest.
inline PlanSolution solve(const PlanProblem& problem, const SolverOptions& opts = {}) {
  problem.validate();

  const auto phi_mu = [&](const Eigen::VectorXd& x, double mu) {
    return detail::penalized_objective(x, problem, mu);
  };
  const auto clamp_vec = [&](Eigen::VectorXd x) {
    return x.cwiseMax(problem.x_min).cwiseMin(problem.x_max);
  };

  Eigen::VectorXd x = clamp_vec(problem.x0);
  std::vector<Eigen::VectorXd> candidates{x};

  int total_iters = 0;
  bool step_converged = false;
  Eigen::VectorXd grad(problem.dim());

  for (double mu = opts.mu0; mu <= opts.mu_max * (1.0 + 1e-12);
       mu *= opts.mu_factor) {
    double alpha_init = 1.0;
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      const double phi_x = phi_mu(x, mu);
      for (int d = 0; d < problem.dim(); ++d) {
        Eigen::VectorXd xp = x, xm = x;
        xp(d) += opts.fd_step;
        xm(d) -= opts.fd_step;
        grad(d) = (phi_mu(xp, mu) - phi_mu(xm, mu)) / (2.0 * opts.fd_step);
      }

      double alpha = alpha_init;
      Eigen::VectorXd x_new = x;
      bool accepted = false;
      for (int h = 0; h < opts.max_halvings; ++h) {
        x_new = clamp_vec(x - alpha * grad);
        const double decrease = grad.dot(x - x_new);
        if (phi_mu(x_new, mu) <= phi_x - opts.armijo_c * decrease &&
            decrease >= 0.0) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;

      const double step_norm = (x_new - x).norm();
      x = x_new;
      ++total_iters;
      if (opts.trace) {
        opts.trace->push_back({total_iters, mu, cost(x, problem),
                               max_residual_norm(x, problem), step_norm});
      }
      alpha_init = std::min(alpha * 2.0, 1e6);
      if (step_norm < opts.step_tol) {
        step_converged = true;
        break;
      }
    }
    candidates.push_back(x);
  }

  // Most feasible first, then cheapest among the (near-)feasible.
  double best_res = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    best_res = std::min(best_res, max_residual_norm(c, problem));
  }
  const double res_tier =
      std::max(opts.accept_tol, best_res + std::max(1e-12, 0.01 * best_res));
  const Eigen::VectorXd* best = nullptr;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (max_residual_norm(c, problem) <= res_tier) {
      const double jc = cost(c, problem);
      if (jc < best_cost) {
        best_cost = jc;
        best = &c;
      }
    }
  }

  PlanSolution sol;
  sol.x_star = *best;
  sol.cost = best_cost;
  sol.iterations = total_iters;
  sol.converged = step_converged;
  sol.constraint_residual = max_residual_norm(sol.x_star, problem);
  if (sol.constraint_residual > opts.feasibility_tol) {
    throw Infeasible("solve: constraint residual " +
                         std::to_string(sol.constraint_residual) +
                         " exceeds tolerance " +
                         std::to_string(opts.feasibility_tol),
                     sol.constraint_residual);
  }
  return sol;
}

/// Builds a PlanProblem whose initial waypoint block is the model rollout of
/// (a0, omega0, phi0), i.e. feasible by construction.
inline PlanProblem make_plan_problem(const Point3& start_com, double heading,
                                     const std::vector<Point3>& desired,
                                     double a0, double omega0, double phi0,
                                     const Eigen::Vector3d& gait_min,
                                     const Eigen::Vector3d& gait_max,
                                     double waypoint_span = 50.0,
                                     double k = 0.02, double beta = 0.0) {
  PlanProblem p;
  p.desired = desired;
  p.start_com = start_com;
  p.heading = heading;
  p.dt_wp = 2.0 * kPi / omega0;  // one gait cycle of the initial guess
  p.k = k;
  p.beta = beta;
  const int n = p.waypoint_count();
  p.x0.resize(p.dim());
  p.x_min.resize(p.dim());
  p.x_max.resize(p.dim());
  p.x0.head<3>() = Eigen::Vector3d(a0, omega0, phi0);
  p.x_min.head<3>() = gait_min;
  p.x_max.head<3>() = gait_max;
  const auto roll = rollout_waypoints(p, a0, omega0, phi0);
  for (int i = 0; i < n; ++i) {
    p.x0.segment<3>(3 + 3 * i) = roll[i];
    p.x_min.segment<3>(3 + 3 * i) =
        Eigen::Vector3d(start_com.x() - waypoint_span, start_com.y() - waypoint_span, 0.0);
    p.x_max.segment<3>(3 + 3 * i) =
        Eigen::Vector3d(start_com.x() + waypoint_span, start_com.y() + waypoint_span, 0.0);
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Docking behavior

enum class DockPhaseKind : std::uint8_t {
  Align,
  FinalApproach,
  Latch,
  Reposition,
  Unlatch,
};

inline const char* dock_phase_name(DockPhaseKind k) {
  switch (k) {
    case DockPhaseKind::Align: return "ALIGN";
    case DockPhaseKind::FinalApproach: return "FINAL_APPROACH";
    case DockPhaseKind::Latch: return "LATCH";
    case DockPhaseKind::Reposition: return "REPOSITION";
    case DockPhaseKind::Unlatch: return "UNLATCH";
  }
  return "?";
}

struct DockPhase {
  DockPhaseKind kind;
  GaitParams gait;
  bool latch_engaged;  // latch command state during/after the phase
  double duration;     // s, upper bound for the phase
};

struct DockingScript {
  std::vector<DockPhase> phases;
  double approach_distance = 0.0;  // head-module distance at scripting time
  double approach_angle = 0.0;     // rad, head offset vs module z axis
};

struct DockingEnvelope {
  double max_distance = 0.5;            // m
  double max_angle = deg2rad(30.0);     // rad
  GaitParams creep{0.1, 2.0 * kPi, 2.0 * kPi / 3.0};
  double align_rate = 0.6;              // rad/s, matches heading servo
  double latch_duration = 0.5;          // s
  double reposition_duration = 4.0;     // s
  double approach_margin = 2.0;         // duration = margin * distance / speed
};

/// Scripted dock sequence from the latest module pose estimate. Durations are
/// upper bounds; execution latches on proximity, not on the clock.
inline DockingScript make_docking_script(const Pose6DoF& module_pose,
                                         const SnakeState& robot,
                                         const RobotParams& params,
                                         const DockingEnvelope& env = {}) {
  if (module_pose.frame != Frame::World) {
    throw FrameMismatch("make_docking_script: module pose must be world-frame");
  }
  const Pose6DoF head = head_pose(robot, params);
  const Vec3 offset = head.position - module_pose.position;
  const double distance = offset.norm();
  if (distance >= env.max_distance) {
    throw OutOfEnvelope("distance", distance, env.max_distance);
  }
  const double angle = vector_angle(offset, module_pose.axis_z());
  if (angle >= env.max_angle) {
    throw OutOfEnvelope("angle", rad2deg(angle), rad2deg(env.max_angle));
  }

  const double target_heading =
      std::atan2(module_pose.position.y() - head.position.y(),
                 module_pose.position.x() - head.position.x());
  const double heading_err = std::abs(wrap_angle(target_heading - robot.heading));
  const double creep_speed = params.k * env.creep.a * env.creep.omega;

  DockingScript script;
  script.approach_distance = distance;
  script.approach_angle = angle;
  script.phases = {
      {DockPhaseKind::Align, GaitParams{0.0, env.creep.omega, env.creep.phi},
       false, heading_err / env.align_rate},
      {DockPhaseKind::FinalApproach, env.creep, false,
       env.approach_margin * distance / creep_speed},
      {DockPhaseKind::Latch, GaitParams{0.0, env.creep.omega, env.creep.phi},
       true, env.latch_duration},
      {DockPhaseKind::Reposition, GaitParams{0.0, env.creep.omega, env.creep.phi},
       true, env.reposition_duration},
      {DockPhaseKind::Unlatch, GaitParams{0.0, env.creep.omega, env.creep.phi},
       false, env.latch_duration},
  };
  return script;
}

}  // namespace cobra
