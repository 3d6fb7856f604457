#include <cmath>

#include "agentsim/dynamics.hpp"
#include "doctest.h"

using namespace agentsim;

TEST_CASE("pid: accumulate-then-output integration order") {
  PidController pid(1.0, 1.0, 0.0);
  // Constant error 1 at dt=0.1: outputs 1.1, 1.2, 1.3.
  CHECK(pid.step(1.0, 0.1) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(pid.step(1.0, 0.1) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(pid.step(1.0, 0.1) == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("pid: reset clears integrator and derivative memory") {
  PidController pid(1.0, 1.0, 0.5);
  pid.step(1.0, 0.1);
  pid.step(2.0, 0.1);
  pid.reset();
  // After reset the derivative term is inert on the first step.
  CHECK(pid.step(1.0, 0.1) == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("pid: output clamp also clamps the integrator (anti-windup)") {
  PidController pid(0.0, 1.0, 0.0);
  pid.set_range(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) pid.step(10.0, 0.1);  // drive hard into the clamp
  CHECK(pid.step(10.0, 0.1) == doctest::Approx(1.0));
  // A sign flip must exit the clamp quickly, not unwind a huge integral.
  double out = 0.0;
  int steps = 0;
  for (; steps < 50; ++steps) {
    out = pid.step(-10.0, 0.1);
    if (out < 0.99) break;
  }
  CHECK(steps < 5);
}

TEST_CASE("dynamics: zero dt leaves the state unchanged") {
  DynamicsController dyn;
  VehicleState s;
  s.pose = {3.0, 4.0, 0.5};
  s.v = 7.0;
  const VehicleState next = dyn.step(s, 1.0, 0.01, 0.0);
  CHECK(next == s);
}

TEST_CASE("dynamics: speed never goes negative") {
  DynamicsController dyn;
  VehicleState s;
  s.v = 0.3;
  for (int i = 0; i < 500; ++i) s = dyn.step(s, -5.0, 0.0, 0.01);
  CHECK(s.v >= 0.0);
  CHECK(s.v == doctest::Approx(0.0));
}

TEST_CASE("dynamics: straight-line acceleration tracks the request") {
  DynamicsController dyn;
  VehicleState s;
  s.v = 10.0;
  const double dt = 0.01;
  for (int i = 0; i < 300; ++i) s = dyn.step(s, 1.0, 0.0, dt);
  // After the PID transient the realized acceleration settles at the request.
  CHECK(s.a == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s.pose.y == doctest::Approx(0.0));
  CHECK(s.steer == doctest::Approx(0.0));
}

TEST_CASE("dynamics: circular motion closed form within 5% per circle") {
  // Constant curvature demand at constant speed: the trajectory must close on
  // a circle of radius 1/kappa (kinematic single track: R = L/tan(steer)).
  DynamicsController dyn;
  const double kappa = 1.0 / 50.0;
  const double v = 10.0;
  VehicleState s;
  s.v = v;
  const double dt = 0.01;
  // Let the steering PID settle first.
  for (int i = 0; i < 200; ++i) s = dyn.step(s, 0.0, kappa, dt);
  // Now measure one full circle: 2*pi*R / v seconds.
  const double t_circle = 2.0 * M_PI / (kappa * v);
  const Pose2 start = s.pose;
  double min_x = s.pose.x, max_x = s.pose.x, min_y = s.pose.y, max_y = s.pose.y;
  const int n = static_cast<int>(t_circle / dt);
  for (int i = 0; i < n; ++i) {
    s = dyn.step(s, 0.0, kappa, dt);
    min_x = std::min(min_x, s.pose.x);
    max_x = std::max(max_x, s.pose.x);
    min_y = std::min(min_y, s.pose.y);
    max_y = std::max(max_y, s.pose.y);
  }
  const double diameter = 2.0 / kappa;
  CHECK(std::abs((max_x - min_x) - diameter) / diameter < 0.05);
  CHECK(std::abs((max_y - min_y) - diameter) / diameter < 0.05);
  // Back near the starting point after one period.
  const double closure = std::hypot(s.pose.x - start.x, s.pose.y - start.y);
  CHECK(closure < 0.05 * diameter);
}

TEST_CASE("dynamics: steering angle respects the actuator limit") {
  DynamicsController dyn;
  VehicleState s;
  s.v = 5.0;
  for (int i = 0; i < 1000; ++i) {
    s = dyn.step(s, 0.0, 10.0, 0.01);  // absurd curvature demand
    CHECK(std::abs(s.steer) <= dyn.params().steer_max + 1e-12);
  }
}

TEST_CASE("dynamics: pedal output bounded") {
  DynamicsController dyn;
  VehicleState s;
  s.v = 10.0;
  for (int i = 0; i < 200; ++i) {
    s = dyn.step(s, 50.0, 0.0, 0.01);
    CHECK(s.pedal <= 1.0 + 1e-12);
    CHECK(s.pedal >= -1.0 - 1e-12);
  }
}

TEST_CASE("dynamics: yaw stays normalized on a long turn") {
  DynamicsController dyn;
  VehicleState s;
  s.v = 10.0;
  for (int i = 0; i < 20000; ++i) {
    s = dyn.step(s, 0.0, 0.05, 0.01);
    CHECK(s.pose.yaw <= M_PI + 1e-9);
    CHECK(s.pose.yaw > -M_PI - 1e-9);
  }
}
