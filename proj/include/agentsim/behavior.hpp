#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "agentsim/geometry.hpp"
#include "agentsim/messages.hpp"

namespace agentsim {

// Guards shared by the reaction computations.
inline constexpr double kEpsV = 0.1;      // m/s: speeds below are "standstill"
inline constexpr double kEpsS = 0.1;      // m: distances below are degenerate
inline constexpr double kEpsKappa = 1e-6; // 1/m: curvature below is "straight"
inline constexpr double kRMax = 10.0;     // cap for a single reaction term

/// Tuning of the driver behavior layer. Defaults hold the acceptance targets;
/// scenario files and the host parameter interface override per agent.
struct BehaviorParameters {
  // Longitudinal reactions.
  double v_desired{13.88};  // m/s, free-driving target speed
  double T{2.0};            // s, desired time headway
  double s0{2.0};           // m, standstill gap
  double a{1.4};            // m/s^2, acceleration tuning (braking interplay)
  double b{0.7};            // m/s^2, comfortable deceleration
  double a_max{2.0};        // m/s^2, maximum demanded acceleration
  double delta{4.0};        // free-reaction exponent

  // Predictive speed control.
  double T_max{10.0};       // s, preview horizon time bound
  double a_lat_max{1.5};    // m/s^2, lateral comfort limit for curves
  double a_pred{1.3};       // m/s^2, deceleration assumed feasible in preview
  double t_ff{2.0};         // s, preview feed-forward (absorbs tracking lag)
  double limit_margin{0.03};// fraction below a preview constraint to aim for

  // Two-point steering.
  double k_near{0.15};
  double k_far{0.05};
  double k_damp{0.3};
  double d_near0{5.0};      // m, near-point base distance
  double t_near{0.5};       // s, near-point speed scaling
  double d_far0{15.0};      // m, far-point base distance
  double t_far{1.5};        // s, far-point speed scaling
  double kappa_max{0.2};    // 1/m, demanded curvature clamp

  // Lateral guidance.
  double lc_duration{5.0};  // s, lane-change fade time
  double lateral_bias{0.0}; // m, steady offset from the reference centerline
};

/// Free-driving reaction (deviation-based). v_T must exceed kEpsV; callers
/// substitute a stopping reaction for commanded standstill.
/// Deficit (v <= v_T): r = (1 - dv/v_T)^delta with dv = v_T - v.
/// Excess  (v >  v_T): r = 2 - (1 - min(dv/v_T, 1))^delta.
/// Continuous through v = v_T (r = 1); range [0, 2].
double reaction_free(double v, double v_T, double delta = 4.0);

enum class FollowMode { follow, stop };

/// Following / stopping reaction r = (ds*/ds)^2 with
///   ds* = s0 + v*T_eff + v*(v - v_pre) / (2*sqrt(a*b)),  floored at s0,
///   T_eff = T - s0/v_pre   (follow mode and v_pre > kEpsV, else T_eff = T).
/// The headway correction makes the measured steady-state gap/v_pre match T
/// instead of T + s0/v_pre. Stop mode uses v_pre = 0.
/// ds <= kEpsS yields kRMax and sets *clamped. Each reaction is capped at kRMax.
double reaction_follow_stop(double v, double v_pre, double ds, FollowMode mode,
                            const BehaviorParameters& p, bool* clamped = nullptr);

/// Comfortable speed for a curvature: sqrt(a_lat_max / |kappa|);
/// +infinity for |kappa| <= kEpsKappa.
double curve_speed_limit(double kappa, double a_lat_max);

/// One preview speed constraint: target speed c at route distance ds.
struct PreviewConstraint {
  double ds{0.0};
  double c{0.0};
};

struct PredictiveSpeed {
  double v_T_pred{0.0};   // most restrictive currently-allowed speed
  double r_free_eff{0.0}; // max of local and preview free reactions
};

/// Combines the local free reaction with preview constraints. A constraint is
/// active when c < v_T_local; the allowed speed at the ego follows a
/// comfortable-deceleration ramp
///   v_allowed = sqrt(((1 - limit_margin)*c)^2 + 2*a_pred*max(0, ds - v*t_ff))
/// and the effective reaction is the more conservative (larger) of the local
/// and preview evaluations of the free reaction.
PredictiveSpeed predictive_target_speed(double v, double v_T_local,
                                        const std::vector<PreviewConstraint>& constraints,
                                        const BehaviorParameters& p);

/// a_des = a_max * (1 - sum of reactions). Never exceeds a_max; equality iff
/// the sum is zero. May be strongly negative.
double combine_acceleration(double a_max, double reaction_sum);

/// Smoothstep lateral offset fade: o(t) = w * (3u^2 - 2u^3), u = clamp(t/dur).
double lane_change_offset(double t, double width, double lc_duration);

/// Persistent behavior state for one agent.
struct GuidanceState {
  double prev_theta_near{std::numeric_limits<double>::quiet_NaN()};
  bool lc_active{false};
  double lc_t{0.0};        // time since the change started
  double lc_width{0.0};    // signed lateral travel, left positive
  bool lc_switched{false}; // reference lane has been reassigned (u >= 0.5)
};

inline double lane_change_progress(const GuidanceState& gs, const BehaviorParameters& p) {
  if (!gs.lc_active) return 0.0;
  return std::clamp(gs.lc_t / std::max(p.lc_duration, 1e-6), 0.0, 1.0);
}

/// One point of the virtual horizon handed to the behavior layer.
struct PathPoint {
  double ds{0.0};                    // route distance from the ego, m
  Vec2 pos;                          // reference-lane centerline position
  double heading{0.0};               // reference-lane tangent
  double kappa{0.0};                 // reference-lane curvature
  std::optional<double> speed_limit; // active legal limit at this point, m/s
  bool stop{false};                  // stop point (stop line or route end)
};

struct LeadInfo {
  double gap{0.0};   // bumper-to-bumper, m (> 0)
  double v_pre{0.0}; // lead speed, m/s
};

/// Everything the behavior step consumes for one tick.
struct DriverInput {
  double t{0.0};
  double dt{0.0};
  Pose2 ego_pose;
  double v{0.0};
  std::optional<double> v_command;    // last SpeedAction target
  std::optional<double> active_limit; // legal limit currently in force
  std::vector<PathPoint> horizon;     // sorted by ds, first point at ds ~ 0
  std::optional<LeadInfo> lead;
  bool begin_lane_change{false};
  double lane_change_width{0.0};      // signed, left positive
};

/// Behavior result plus the diagnostics the host exposes as a debug channel.
struct StabilizationOutput {
  double a_des{0.0};
  double kappa_des{0.0};
  double v_T_local{0.0};
  double v_T_pred{0.0};
  double r_free{0.0};
  double r_follow{0.0};
  double r_stop{0.0};
  double thw{std::numeric_limits<double>::infinity()};
  double lc_u{0.0};
  double offset_target{0.0};
  bool degenerate{false};
};

/// Interpolated sample of the horizon polyline at route distance ds.
struct PathSample {
  Vec2 pos;
  double heading{0.0};
  double kappa{0.0};
};
PathSample sample_path(const std::vector<PathPoint>& horizon, double ds);

/// Two-point steering: kappa_des = k_near*theta_near + k_far*theta_far +
/// k_damp * d(theta_near)/dt (backward difference via state).
double steer_two_point(const Pose2& ego, double v, const Vec2& near_pt, const Vec2& far_pt,
                       double dt, GuidanceState& gs, const BehaviorParameters& p);

/// Full behavior step: target-speed selection, reaction combination, lane
/// change fade and steering. Mutates the guidance state (lane-change progress,
/// steering memory). Degenerate input produces a safe stop request.
StabilizationOutput step_behavior(const DriverInput& in, GuidanceState& gs,
                                  const BehaviorParameters& p);

}  // namespace agentsim
