#pragma once

#include <cmath>
#include <limits>

#include "agentsim/messages.hpp"

namespace agentsim {

/// Discrete PID with clamped-integrator anti-windup. Integration order:
/// accumulate, then emit (a constant error e for n steps yields
/// kp*e + ki*n*dt*e).
class PidController {
 public:
  PidController() = default;
  PidController(double kp, double ki, double kd) : kp_(kp), ki_(ki), kd_(kd) {}

  void set_parameters(double kp, double ki, double kd) { kp_ = kp; ki_ = ki; kd_ = kd; }
  /// Output range; the integrator is clamped so it cannot wind past it.
  void set_range(double lo, double hi) { lo_ = lo; hi_ = hi; }
  void reset() {
    integral_ = 0.0;
    prev_error_ = std::numeric_limits<double>::quiet_NaN();
  }

  double step(double error, double dt) {
    integral_ += error * dt;
    if (ki_ > 0.0) {
      const double i_lo = lo_ / ki_;
      const double i_hi = hi_ / ki_;
      integral_ = std::clamp(integral_, i_lo, i_hi);
    }
    double derivative = 0.0;
    if (dt > 0.0 && std::isfinite(prev_error_)) derivative = (error - prev_error_) / dt;
    prev_error_ = error;
    const double out = kp_ * error + ki_ * integral_ + kd_ * derivative;
    return std::clamp(out, lo_, hi_);
  }

 private:
  double kp_{0.0};
  double ki_{0.0};
  double kd_{0.0};
  double lo_{-std::numeric_limits<double>::infinity()};
  double hi_{std::numeric_limits<double>::infinity()};
  double integral_{0.0};
  double prev_error_{std::numeric_limits<double>::quiet_NaN()};
};

struct DynamicsParameters {
  double wheelbase{2.8};     // m
  double pedal_gain{6.0};    // m/s^2 per pedal unit; pedal in [-1, 1]
  double a_min{-6.0};        // m/s^2, actuator floor
  double a_max_act{4.0};     // m/s^2, actuator ceiling
  double steer_max{0.6};     // rad
  // Longitudinal PID: pedal from acceleration error.
  double pid_long_kp{0.05};
  double pid_long_ki{1.0};
  double pid_long_kd{0.0};
  // Lateral PID: steering rate from steering-angle error.
  double pid_lat_kp{8.0};
  double pid_lat_ki{0.0};
  double pid_lat_kd{0.0};
};

/// Kinematic single-track state.
struct VehicleState {
  Pose2 pose;
  double v{0.0};      // m/s, >= 0
  double a{0.0};      // m/s^2, realized
  double steer{0.0};  // rad
  double pedal{0.0};  // [-1, 1]

  bool operator==(const VehicleState&) const = default;
};

/// Tracks (a_des, kappa_des) with two PID loops and integrates the kinematic
/// single-track model by explicit Euler. dt = 0 leaves the state unchanged.
class DynamicsController {
 public:
  explicit DynamicsController(const DynamicsParameters& p = {}) { configure(p); }

  void configure(const DynamicsParameters& p) {
    params_ = p;
    pid_long_.set_parameters(p.pid_long_kp, p.pid_long_ki, p.pid_long_kd);
    pid_long_.set_range(-1.0, 1.0);
    pid_lat_.set_parameters(p.pid_lat_kp, p.pid_lat_ki, p.pid_lat_kd);
    // Output is a steering rate; generous range, the angle itself is clamped.
    pid_lat_.set_range(-10.0, 10.0);
  }
  void reset() {
    pid_long_.reset();
    pid_lat_.reset();
  }
  const DynamicsParameters& params() const { return params_; }

  VehicleState step(const VehicleState& state, double a_des, double kappa_des, double dt);

 private:
  DynamicsParameters params_;
  PidController pid_long_;
  PidController pid_lat_;
};

}  // namespace agentsim
