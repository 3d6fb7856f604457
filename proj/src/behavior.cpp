#include "agentsim/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace agentsim {

double reaction_free(double v, double v_T, double delta) {
  const double dv = v_T - v;
  const double ratio = std::min(std::abs(dv) / v_T, 1.0);
  if (dv >= 0.0) return std::pow(1.0 - ratio, delta);
  return 2.0 - std::pow(1.0 - ratio, delta);
}

double reaction_follow_stop(double v, double v_pre, double ds, FollowMode mode,
                            const BehaviorParameters& p, bool* clamped) {
  if (clamped) *clamped = false;
  if (ds <= kEpsS) {
    if (clamped) *clamped = true;
    return kRMax;
  }
  const double vp = mode == FollowMode::stop ? 0.0 : v_pre;
  double t_eff = p.T;
  if (mode == FollowMode::follow && vp > kEpsV) t_eff = p.T - p.s0 / vp;
  double ds_star = p.s0 + v * t_eff + v * (v - vp) / (2.0 * std::sqrt(p.a * p.b));
  ds_star = std::max(ds_star, p.s0);
  double r = (ds_star / ds) * (ds_star / ds);
  if (r > kRMax) {
    if (clamped) *clamped = true;
    r = kRMax;
  }
  return r;
}

double curve_speed_limit(double kappa, double a_lat_max) {
  const double k = std::abs(kappa);
  if (k <= kEpsKappa) return std::numeric_limits<double>::infinity();
  return std::sqrt(a_lat_max / k);
}

PredictiveSpeed predictive_target_speed(double v, double v_T_local,
                                        const std::vector<PreviewConstraint>& constraints,
                                        const BehaviorParameters& p) {
  PredictiveSpeed out;
  double v_pred = v_T_local;
  for (const auto& c : constraints) {
    if (c.c >= v_T_local) continue;  // cannot bind below the local target
    const double c_aim = std::max((1.0 - p.limit_margin) * c.c, kEpsV);
    const double run_in = std::max(0.0, c.ds - v * p.t_ff);
    const double v_allowed = std::sqrt(c_aim * c_aim + 2.0 * p.a_pred * run_in);
    v_pred = std::min(v_pred, v_allowed);
  }
  v_pred = std::max(v_pred, kEpsV);
  out.v_T_pred = v_pred;
  const double r_local = reaction_free(v, v_T_local, p.delta);
  const double r_preview = reaction_free(v, v_pred, p.delta);
  out.r_free_eff = std::max(r_local, r_preview);
  return out;
}

double combine_acceleration(double a_max, double reaction_sum) {
  return a_max * (1.0 - reaction_sum);
}

double lane_change_offset(double t, double width, double lc_duration) {
  const double u = std::clamp(t / std::max(lc_duration, 1e-6), 0.0, 1.0);
  return width * (3.0 * u * u - 2.0 * u * u * u);
}

PathSample sample_path(const std::vector<PathPoint>& horizon, double ds) {
  PathSample s;
  if (horizon.empty()) return s;
  if (ds <= horizon.front().ds) {
    const auto& q = horizon.front();
    return {q.pos, q.heading, q.kappa};
  }
  if (ds >= horizon.back().ds) {
    const auto& q = horizon.back();
    return {q.pos, q.heading, q.kappa};
  }
  auto it = std::lower_bound(horizon.begin(), horizon.end(), ds,
                             [](const PathPoint& a, double val) { return a.ds < val; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double span = hi.ds - lo.ds;
  const double t = span > 0.0 ? (ds - lo.ds) / span : 0.0;
  s.pos = lo.pos + (hi.pos - lo.pos) * t;
  // Interpolate the tangent via its unit vector to stay continuous across the
  // -pi/pi seam.
  const Vec2 t0{std::cos(lo.heading), std::sin(lo.heading)};
  const Vec2 t1{std::cos(hi.heading), std::sin(hi.heading)};
  const Vec2 tv = t0 + (t1 - t0) * t;
  s.heading = std::atan2(tv.y, tv.x);
  s.kappa = lo.kappa + (hi.kappa - lo.kappa) * t;
  return s;
}

double steer_two_point(const Pose2& ego, double v, const Vec2& near_pt, const Vec2& far_pt,
                       double dt, GuidanceState& gs, const BehaviorParameters& p) {
  const auto bearing = [&ego](const Vec2& pt) {
    return normalize_angle(std::atan2(pt.y - ego.y, pt.x - ego.x) - ego.yaw);
  };
  const double theta_near = bearing(near_pt);
  const double theta_far = bearing(far_pt);
  double dtheta = 0.0;
  if (dt > 0.0 && std::isfinite(gs.prev_theta_near))
    dtheta = normalize_angle(theta_near - gs.prev_theta_near) / dt;
  gs.prev_theta_near = theta_near;
  const double kappa = p.k_near * theta_near + p.k_far * theta_far + p.k_damp * dtheta;
  return std::clamp(kappa, -p.kappa_max, p.kappa_max);
}

StabilizationOutput step_behavior(const DriverInput& in, GuidanceState& gs,
                                  const BehaviorParameters& p) {
  StabilizationOutput out;

  const bool bad_input = in.horizon.empty() || !std::isfinite(in.v) || in.v < 0.0 ||
                         !std::isfinite(in.ego_pose.x) || !std::isfinite(in.ego_pose.y) ||
                         !std::isfinite(in.ego_pose.yaw);
  if (bad_input) {
    out.degenerate = true;
    out.a_des = -p.b;  // safe stop request
    out.kappa_des = 0.0;
    out.v_T_local = out.v_T_pred = 0.0;
    return out;
  }

  // --- target speed ----------------------------------------------------------
  double v_T_local = p.v_desired;
  if (in.v_command) v_T_local = std::min(v_T_local, *in.v_command);
  if (in.active_limit) v_T_local = std::min(v_T_local, *in.active_limit);
  out.v_T_local = v_T_local;

  double r_free = 0.0;
  double r_stop = 0.0;
  if (v_T_local > kEpsV) {
    std::vector<PreviewConstraint> constraints;
    constraints.reserve(in.horizon.size());
    for (const auto& pt : in.horizon) {
      double c = curve_speed_limit(pt.kappa, p.a_lat_max);
      if (pt.speed_limit) c = std::min(c, *pt.speed_limit);
      if (std::isfinite(c)) constraints.push_back({pt.ds, c});
    }
    const PredictiveSpeed pred = predictive_target_speed(in.v, v_T_local, constraints, p);
    r_free = pred.r_free_eff;
    out.v_T_pred = pred.v_T_pred;
  } else {
    // Commanded standstill: substitute a stopping reaction at a comfortable
    // stopping distance instead of evaluating the free reaction at ~0 target.
    out.v_T_pred = 0.0;
    const double ds_virtual = std::max(p.s0 + in.v * in.v / (2.0 * p.b), kEpsS + 1e-6);
    r_stop = std::max(r_stop, reaction_follow_stop(in.v, 0.0, ds_virtual, FollowMode::stop, p));
  }
  out.r_free = r_free;

  // --- stop points ------------------------------------------------------------
  for (const auto& pt : in.horizon) {
    if (!pt.stop) continue;
    r_stop = std::max(r_stop, reaction_follow_stop(in.v, 0.0, std::max(pt.ds, 0.0),
                                                   FollowMode::stop, p));
  }
  out.r_stop = r_stop;

  // --- lead vehicle -----------------------------------------------------------
  double r_follow = 0.0;
  if (in.lead) {
    r_follow = reaction_follow_stop(in.v, in.lead->v_pre, in.lead->gap, FollowMode::follow, p);
    out.thw = in.v > kEpsV ? in.lead->gap / in.v : std::numeric_limits<double>::infinity();
  }
  out.r_follow = r_follow;

  out.a_des = combine_acceleration(p.a_max, r_free + r_stop + r_follow);

  // --- lane change fade --------------------------------------------------------
  if (in.begin_lane_change && !gs.lc_active) {
    gs.lc_active = true;
    gs.lc_t = 0.0;
    gs.lc_width = in.lane_change_width;
    gs.lc_switched = false;
  }
  double lc_offset = 0.0;
  if (gs.lc_active) {
    lc_offset = lane_change_offset(gs.lc_t, gs.lc_width, p.lc_duration);
    if (gs.lc_switched) lc_offset -= gs.lc_width;  // offset is now relative to the target lane
    out.lc_u = lane_change_progress(gs, p);
    gs.lc_t += in.dt;
  }
  out.offset_target = p.lateral_bias + lc_offset;

  // --- steering ----------------------------------------------------------------
  const double ds_near = p.d_near0 + in.v * p.t_near;
  const double ds_far = p.d_far0 + in.v * p.t_far;
  const auto offset_point = [&](double ds) {
    const PathSample s = sample_path(in.horizon, ds);
    const Vec2 normal{-std::sin(s.heading), std::cos(s.heading)};
    return s.pos + normal * out.offset_target;
  };
  out.kappa_des = steer_two_point(in.ego_pose, in.v, offset_point(ds_near),
                                  offset_point(ds_far), in.dt, gs, p);
  return out;
}

}  // namespace agentsim
