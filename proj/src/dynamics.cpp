#include "agentsim/dynamics.hpp"

#include <algorithm>

#include "agentsim/geometry.hpp"

namespace agentsim {

VehicleState DynamicsController::step(const VehicleState& state, double a_des,
                                      double kappa_des, double dt) {
  if (dt <= 0.0) return state;
  const DynamicsParameters& p = params_;
  VehicleState next = state;

  // Longitudinal: PID drives the pedal so the realized acceleration tracks
  // the (actuator-clamped) demand.
  const double a_target = std::clamp(a_des, p.a_min, p.a_max_act);
  next.pedal = std::clamp(pid_long_.step(a_target - state.a, dt), -1.0, 1.0);
  double a_real = std::clamp(next.pedal * p.pedal_gain, p.a_min, p.a_max_act);

  // Lateral: PID outputs a steering rate toward the kinematic target angle.
  const double steer_target = std::atan(p.wheelbase * kappa_des);
  const double steer_rate = pid_lat_.step(steer_target - state.steer, dt);
  next.steer = std::clamp(state.steer + steer_rate * dt, -p.steer_max, p.steer_max);

  // Kinematic single-track, explicit Euler.
  next.pose.x = state.pose.x + state.v * std::cos(state.pose.yaw) * dt;
  next.pose.y = state.pose.y + state.v * std::sin(state.pose.yaw) * dt;
  next.pose.yaw = normalize_angle(state.pose.yaw +
                                  state.v * std::tan(next.steer) / p.wheelbase * dt);
  const double v_new = std::max(0.0, state.v + a_real * dt);
  next.a = (v_new - state.v) / dt;  // realized, accounts for the v >= 0 floor
  next.v = v_new;
  return next;
}

}  // namespace agentsim
