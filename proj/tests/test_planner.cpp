#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cobra/planner.hpp"
#include "oracles.hpp"

using namespace cobra;
using Catch::Approx;

namespace {

const Eigen::Vector3d kGaitMin(0.0, 0.5, 0.0);
const Eigen::Vector3d kGaitMax(1.0, 4.0 * kPi, kPi);

PlanProblem line_problem(double length, int n, double a0 = 0.5,
                         double omega0 = 2.0 * kPi, double phi0 = kPi / 3) {
  std::vector<Point3> desired;
  for (int i = 1; i <= n; ++i) {
    desired.push_back({length * i / n, 0.0, 0.0});
  }
  return make_plan_problem({0, 0, 0}, 0.0, desired, a0, omega0, phi0, kGaitMin,
                           kGaitMax);
}

// Independent chained-prediction oracle: explicit loop over the displacement
// formula, no shared code with constraint_residual.
std::vector<Eigen::Vector3d> chained_prediction_oracle(
    const Eigen::VectorXd& x, const PlanProblem& p) {
  const double a = x(0), omega = x(1);
  std::vector<Eigen::Vector3d> res;
  double px = p.start_com.x(), py = p.start_com.y(), pz = p.start_com.z();
  for (int i = 0; i < p.waypoint_count(); ++i) {
    const double step = p.k * a * omega * p.dt_wp;
    px += step * std::cos(p.heading + p.beta);
    py += step * std::sin(p.heading + p.beta);
    res.push_back(Eigen::Vector3d(px, py, pz) -
                  Eigen::Vector3d(x(3 + 3 * i), x(4 + 3 * i), x(5 + 3 * i)));
  }
  return res;
}

// Exhaustive search over (a, omega, phi) with waypoints substituted by the
// model rollout.
double grid_search_best_cost(const PlanProblem& p, int res) {
  double best = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia < res; ++ia) {
    const double a = p.x_min(0) + (p.x_max(0) - p.x_min(0)) * ia / (res - 1);
    for (int io = 0; io < res; ++io) {
      const double omega =
          p.x_min(1) + (p.x_max(1) - p.x_min(1)) * io / (res - 1);
      for (int ip = 0; ip < res; ++ip) {
        const double phi =
            p.x_min(2) + (p.x_max(2) - p.x_min(2)) * ip / (res - 1);
        const auto wps = rollout_waypoints(p, a, omega, phi);
        double j = 0.0;
        for (int i = 0; i < p.waypoint_count(); ++i) {
          j += (wps[i] - p.desired[i]).squaredNorm();
        }
        best = std::min(best, j);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("cost") {
  auto p = line_problem(1.0, 4);

  SECTION("zero when waypoints equal desired") {
    Eigen::VectorXd x = p.x0;
    for (int i = 0; i < 4; ++i) x.segment<3>(3 + 3 * i) = p.desired[i];
    CHECK(cost(x, p) == 0.0);
  }

  SECTION("3-4-5 offset") {
    auto p1 = line_problem(1.0, 1);
    Eigen::VectorXd x = p1.x0;
    x.segment<3>(3) = p1.desired[0] + Point3(0.3, 0.4, 0.0);
    CHECK(cost(x, p1) == Approx(0.25).margin(1e-15));
  }

  SECTION("matches a brute-force summation oracle") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x = p.x0;
      for (int i = 3; i < x.size(); ++i) x(i) = d(rng);
      long double expect = 0;
      for (int i = 0; i < 4; ++i) {
        for (int c = 0; c < 3; ++c) {
          const long double diff = x(3 + 3 * i + c) - p.desired[i](c);
          expect += diff * diff;
        }
      }
      CHECK(cost(x, p) == Approx(double(expect)).margin(1e-12));
    }
  }

  SECTION("dimension mismatch throws") {
    Eigen::VectorXd x(5);
    x.setZero();
    CHECK_THROWS_AS(cost(x, p), DimensionMismatch);
  }
}

TEST_CASE("cost_gradient matches central differences") {
  auto p = line_problem(1.5, 3);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x = p.x0;
    for (int i = 0; i < x.size(); ++i) x(i) += 0.1 * d(rng);
    const Eigen::VectorXd ga = cost_gradient(x, p);
    Eigen::VectorXd gn(x.size());
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      gn(i) = (cost(xp, p) - cost(xm, p)) / (2.0 * h);
    }
    const double denom = std::max({ga.norm(), gn.norm(), 1e-12});
    CHECK((ga - gn).norm() / denom < 1e-5);
  }
}

TEST_CASE("constraint_residual") {
  auto p = line_problem(1.0, 4);

  SECTION("rollout waypoints are feasible") {
    for (const auto& r : constraint_residual(p.x0, p)) {
      CHECK(r.norm() < 1e-15);
    }
  }

  SECTION("perturbing one waypoint moves exactly one residual") {
    Eigen::VectorXd x = p.x0;
    x(3 + 3 * 2) += 0.1;  // third waypoint, x component
    const auto rs = constraint_residual(x, p);
    for (int i = 0; i < 4; ++i) {
      if (i == 2) {
        CHECK(rs[i].x() == Approx(-0.1).margin(1e-15));
        CHECK(rs[i].y() == 0.0);
      } else {
        CHECK(rs[i].norm() < 1e-15);
      }
    }
  }

  SECTION("matches the independent chained oracle") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x = p.x0;
      for (int i = 0; i < x.size(); ++i) x(i) += 0.3 * std::abs(d(rng));
      const auto rs = constraint_residual(x, p);
      const auto expect = chained_prediction_oracle(x, p);
      for (int i = 0; i < 4; ++i) {
        CHECK((rs[i] - expect[i]).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("solve") {
  SECTION("stationary task converges to zero cost") {
    std::vector<Point3> desired(3, Point3(0, 0, 0));
    auto p = make_plan_problem({0, 0, 0}, 0.0, desired, 0.5, 2.0 * kPi,
                               kPi / 3, kGaitMin, kGaitMax);
    const auto sol = solve(p);
    CHECK(sol.cost < 1e-6);
    CHECK(sol.constraint_residual < 1e-6);
  }

  SECTION("feasible-by-construction target is tracked exactly") {
    // Desired waypoints are the rollout of gait (0.7, 5.0, 1.0); start from a
    // different gait.
    auto probe = line_problem(1.0, 5, 0.7, 5.0, 1.0);
    const auto target = rollout_waypoints(probe, 0.7, 5.0, 1.0);
    auto p = make_plan_problem({0, 0, 0}, 0.0, target, 0.3, 5.0, 0.4, kGaitMin,
                               kGaitMax);
    p.dt_wp = probe.dt_wp;
    const auto sol = solve(p);
    CHECK(sol.cost < 1e-6);
    CHECK(sol.constraint_residual < 1e-6);
    CHECK(cost(p.x0, p) > 1e-3);  // the start was not already optimal
  }

  SECTION("one meter straight line beats the grid oracle") {
    auto p = line_problem(1.0, 10);
    const auto sol = solve(p);
    const Point3 last = PlanProblem::waypoint_of(sol.x_star, 9);
    CHECK((last - Point3(1.0, 0.0, 0.0)).norm() < 0.05);
    const double grid_best = grid_search_best_cost(p, 50);
    CHECK(sol.cost <= 1.05 * grid_best + 1e-12);
  }

  SECTION("bounds stay satisfied and cost never increases on feasible starts") {
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Point3> desired;
      const int n = 2 + trial;
      for (int i = 0; i < n; ++i) {
        desired.push_back({d(rng), 0.5 * d(rng) - 0.25, 0.0});
      }
      auto p = make_plan_problem({0, 0, 0}, 0.4 * d(rng), desired,
                                 0.2 + 0.6 * d(rng), 1.0 + 8.0 * d(rng),
                                 kPi * d(rng), kGaitMin, kGaitMax);
      const double j0 = cost(p.x0, p);
      const auto sol = solve(p);
      CHECK(sol.cost <= j0 + 1e-12);
      for (int i = 0; i < p.dim(); ++i) {
        CHECK(sol.x_star(i) >= p.x_min(i));
        CHECK(sol.x_star(i) <= p.x_max(i));
      }
    }
  }

  SECTION("immobilized robot with pinned waypoints is infeasible") {
    PlanProblem p;
    p.desired = {{1.0, 0.0, 0.0}};
    p.start_com = {0, 0, 0};
    p.heading = 0.0;
    p.dt_wp = 1.0;
    p.x0.resize(6);
    p.x_min.resize(6);
    p.x_max.resize(6);
    p.x0 << 0.0, 2.0, 0.5, 1.0, 0.0, 0.0;
    p.x_min << 0.0, 0.5, 0.0, 0.9, -0.1, 0.0;
    p.x_max << 0.0, 12.0, kPi, 1.1, 0.1, 0.0;
    CHECK_THROWS_AS(solve(p), Infeasible);
  }

  SECTION("trace rows are recorded") {
    auto p = line_problem(0.5, 3);
    std::vector<SolveTraceRow> trace;
    SolverOptions opts;
    opts.trace = &trace;
    solve(p, opts);
    REQUIRE_FALSE(trace.empty());
    CHECK(trace.front().iteration == 1);
    CHECK(trace.back().mu >= trace.front().mu);
  }
}

TEST_CASE("make_docking_script") {
  RobotParams robot;
  DockingEnvelope env;

  // Module 0.4 m straight ahead of the head, facing back at it.
  const auto state = make_rest_state(robot, {0, 0, 0}, 0.0);
  const auto head = head_pose(state, robot);
  Pose6DoF module;
  module.frame = Frame::World;
  module.position = head.position + Vec3(0.4, 0.0, 0.0);
  module.rotation.col(0) = Vec3(0, 0, 1);
  module.rotation.col(2) = Vec3(-1, 0, 0);  // z back toward the robot
  module.rotation.col(1) = module.rotation.col(2).cross(module.rotation.col(0));

  SECTION("aligned robot gets a zero-length ALIGN phase") {
    const auto script = make_docking_script(module, state, robot, env);
    REQUIRE(script.phases.size() == 5);
    CHECK(script.phases[0].kind == DockPhaseKind::Align);
    CHECK(script.phases[0].duration == Approx(0.0).margin(1e-12));
    CHECK(script.phases[1].kind == DockPhaseKind::FinalApproach);
    CHECK(script.phases[1].duration > 0.0);
    CHECK(script.phases[2].kind == DockPhaseKind::Latch);
    CHECK(script.phases[2].latch_engaged);
    CHECK(script.phases[3].kind == DockPhaseKind::Reposition);
    CHECK(script.phases[4].kind == DockPhaseKind::Unlatch);
    CHECK_FALSE(script.phases[4].latch_engaged);
  }

  SECTION("steep approach angle is out of envelope") {
    Pose6DoF steep = module;
    steep.rotation = rot_z(deg2rad(45.0)) * module.rotation;
    try {
      make_docking_script(steep, state, robot, env);
      FAIL("expected OutOfEnvelope");
    } catch (const OutOfEnvelope& e) {
      CHECK(e.quantity == "angle");
    }
  }

  SECTION("distant module is out of envelope") {
    Pose6DoF far = module;
    far.position = head.position + Vec3(0.8, 0.0, 0.0);
    try {
      make_docking_script(far, state, robot, env);
      FAIL("expected OutOfEnvelope");
    } catch (const OutOfEnvelope& e) {
      CHECK(e.quantity == "distance");
    }
  }
}
