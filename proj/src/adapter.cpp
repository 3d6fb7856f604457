#include "agentsim/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agentsim/errors.hpp"

namespace agentsim {

namespace {

const MovingObjectState* find_ego(const SensorView& view) {
  for (const auto& o : view.objects)
    if (o.id == view.ego_id) return &o;
  return nullptr;
}

}  // namespace

void DriverAdapter::reset() {
  plan_ids_.clear();
  plan_via_change_.clear();
  idx_ = 0;
  has_goal_ = false;
  goal_s_ = 0.0;
  goal_lane_.clear();
  s_ref_ = 0.0;
  v_command_.reset();
  active_limit_.reset();
  cleared_stops_.clear();
  wait_key_.clear();
  wait_t_ = 0.0;
  remaining_route_m_ = std::numeric_limits<double>::infinity();
  events_ = {};
  diagnostics_.clear();
}

std::string DriverAdapter::stop_key(const std::string& lane, double s) const {
  std::ostringstream os;
  os << lane << '@' << s;
  return os.str();
}

void DriverAdapter::build_default_plan(const std::string& from_lane) {
  plan_ids_ = {from_lane};
  plan_via_change_ = {false};
  idx_ = 0;
  has_goal_ = false;
  goal_lane_.clear();
}

void DriverAdapter::extend_plan_greedy(double needed_m) {
  if (has_goal_ || !map_) return;
  double tail = 0.0;
  for (std::size_t i = idx_; i < plan_ids_.size(); ++i)
    tail += map_->lane(plan_ids_[i]).length();
  tail -= s_ref_;
  double total = tail;
  while (total < needed_m && total < 5000.0) {
    const Lane& last = map_->lane(plan_ids_.back());
    if (last.successors.empty()) break;
    // Deterministic default continuation: lexicographically smallest successor.
    const std::string next = *std::min_element(last.successors.begin(), last.successors.end());
    plan_ids_.push_back(next);
    plan_via_change_.push_back(false);
    total += map_->lane(next).length();
  }
}

void DriverAdapter::apply_command(const TrafficCommand& cmd, const Pose2& ego_pose) {
  if (!map_) return;
  events_.command_rejected = false;
  for (const auto& action : cmd.actions) {
    if (action.type == TrafficAction::Type::speed) {
      v_command_ = action.v;
      continue;
    }
    // acquire_position
    LaneProjection goal;
    try {
      goal = project(*map_, {action.x, action.y}, params_.d_max);
    } catch (const OffRoadError& e) {
      diagnostics_.push_back(std::string("command rejected, goal off-road: ") + e.what());
      events_.command_rejected = true;
      continue;
    }
    std::string from_lane;
    double from_s = 0.0;
    if (plan_ids_.empty()) {
      try {
        const LaneProjection seat = project(*map_, {ego_pose.x, ego_pose.y}, params_.d_max);
        from_lane = seat.lane_id;
        from_s = seat.s;
      } catch (const OffRoadError& e) {
        diagnostics_.push_back(std::string("command rejected, ego off-road: ") + e.what());
        events_.command_rejected = true;
        continue;
      }
    } else {
      from_lane = plan_ids_[idx_];
      from_s = s_ref_;
    }
    try {
      const Route route = shortest_route(*map_, from_lane, from_s, goal.lane_id, goal.s,
                                         params_.lane_change_penalty);
      plan_ids_.clear();
      plan_via_change_.clear();
      for (const auto& step : route.steps) {
        plan_ids_.push_back(step.lane_id);
        plan_via_change_.push_back(step.via_lane_change);
      }
      idx_ = 0;
      s_ref_ = from_s;
      has_goal_ = true;
      goal_s_ = route.goal_s;
      goal_lane_ = goal.lane_id;
    } catch (const NoRouteError& e) {
      diagnostics_.push_back(std::string("command rejected, no route: ") + e.what());
      events_.command_rejected = true;
    }
  }
}

DriverInput DriverAdapter::build(const SensorView& view, GuidanceState& gs,
                                 const BehaviorParameters& bp, double t, double dt) {
  events_.lane_change_started = false;
  events_.lane_change_completed = false;

  DriverInput in;
  in.t = t;
  in.dt = dt;

  const MovingObjectState* ego = map_ ? find_ego(view) : nullptr;
  if (!ego) {
    diagnostics_.push_back(map_ ? "ego object missing from view" : "no map set");
    return in;  // empty horizon: behavior requests a safe stop
  }
  in.ego_pose = ego->pose;
  in.v = ego->v;
  in.v_command = v_command_;

  // --- seat the plan -----------------------------------------------------------
  if (plan_ids_.empty()) {
    std::string lane = ego->lane_id;
    if (lane.empty() || !map_->has_lane(lane)) {
      try {
        lane = project(*map_, {ego->pose.x, ego->pose.y}, params_.d_max).lane_id;
      } catch (const OffRoadError& e) {
        diagnostics_.push_back(std::string("ego off-road: ") + e.what());
        return in;
      }
    }
    build_default_plan(lane);
  }

  // --- lane-change frame bookkeeping --------------------------------------------
  if (gs.lc_active) {
    const double u = lane_change_progress(gs, bp);
    if (u >= 0.5 && !gs.lc_switched) {
      if (idx_ + 1 < plan_ids_.size() && plan_via_change_[idx_ + 1]) idx_ += 1;
      gs.lc_switched = true;  // offsets are now relative to the target lane
    }
    if (u >= 1.0) {
      gs.lc_active = false;
      events_.lane_change_completed = true;
    }
  }

  // --- locate the ego on the reference lane --------------------------------------
  const Lane* ref = &map_->lane(plan_ids_[idx_]);
  PolylineProjection proj = ref->centerline.project({ego->pose.x, ego->pose.y});
  if (std::abs(proj.d) > 1.5 * ref->width) {
    // Far from the planned path: re-seat and re-route.
    diagnostics_.push_back("ego left the planned path near lane '" + ref->id + "'; re-seating");
    try {
      const LaneProjection seat = project(*map_, {ego->pose.x, ego->pose.y}, params_.d_max);
      build_default_plan(seat.lane_id);
      if (!goal_lane_.empty()) {
        try {
          const Route route = shortest_route(*map_, seat.lane_id, seat.s, goal_lane_, goal_s_,
                                             params_.lane_change_penalty);
          plan_ids_.clear();
          plan_via_change_.clear();
          for (const auto& step : route.steps) {
            plan_ids_.push_back(step.lane_id);
            plan_via_change_.push_back(step.via_lane_change);
          }
          has_goal_ = true;
        } catch (const NoRouteError&) {
          diagnostics_.push_back("goal unreachable after re-seating; goal dropped");
          has_goal_ = false;
          goal_lane_.clear();
        }
      }
      idx_ = 0;
      ref = &map_->lane(plan_ids_[idx_]);
      proj = ref->centerline.project({ego->pose.x, ego->pose.y});
    } catch (const OffRoadError& e) {
      diagnostics_.push_back(std::string("ego off-road: ") + e.what());
      return in;
    }
  }
  s_ref_ = proj.s;

  // Cross successor boundaries the ego passed since the previous step.
  for (int hop = 0; hop < 4; ++hop) {
    if (s_ref_ < ref->length() - 0.05) break;
    if (idx_ + 1 >= plan_ids_.size() || plan_via_change_[idx_ + 1]) break;
    idx_ += 1;
    ref = &map_->lane(plan_ids_[idx_]);
    proj = ref->centerline.project({ego->pose.x, ego->pose.y});
    s_ref_ = proj.s;
  }

  const double ds_max = std::max(in.v * bp.T_max, params_.min_horizon);
  extend_plan_greedy(ds_max + 60.0);

  // --- geometric chain ahead of the ego -------------------------------------------
  // Route steps connected by successor edges; a pending lane change ends the
  // routed part and the chain continues along default successors.
  struct ChainLane {
    const Lane* lane;
    double start_ds;  // ds of the lane's s = 0
    bool routed;
  };
  std::vector<ChainLane> chain;
  chain.push_back({ref, -s_ref_, true});
  double covered = ref->length() - s_ref_;
  std::size_t plan_pos = idx_;
  bool routed_part = true;
  while (covered < ds_max + 30.0) {
    const Lane* next = nullptr;
    bool next_routed = false;
    if (routed_part && plan_pos + 1 < plan_ids_.size() && !plan_via_change_[plan_pos + 1]) {
      plan_pos += 1;
      next = &map_->lane(plan_ids_[plan_pos]);
      next_routed = true;
    } else {
      if (routed_part && plan_pos + 1 < plan_ids_.size()) {
        routed_part = false;  // change pending; geometry continues along this lane
      } else if (routed_part && has_goal_) {
        break;  // routed plan ends at the goal lane
      }
      routed_part = false;
      const Lane& last = *chain.back().lane;
      if (last.successors.empty()) break;
      next = &map_->lane(*std::min_element(last.successors.begin(), last.successors.end()));
    }
    chain.push_back({next, chain.back().start_ds + chain.back().lane->length(), next_routed});
    covered += next->length();
  }

  // End of the routed geometry: goal point or physical road end.
  double ds_end = ds_max;
  bool end_is_stop = false;
  if (has_goal_) {
    // Goal binds only once the remaining plan has no pending change.
    bool change_pending = false;
    for (std::size_t i = idx_ + 1; i < plan_ids_.size(); ++i)
      if (plan_via_change_[i]) change_pending = true;
    if (!change_pending && !chain.empty()) {
      for (const auto& cl : chain) {
        if (cl.lane->id == plan_ids_.back() && cl.routed) {
          const double ds_goal = cl.start_ds + goal_s_;
          if (ds_goal <= ds_max) {
            ds_end = std::max(ds_goal, 0.0);
            end_is_stop = true;
          }
          break;
        }
      }
    }
  }
  const double chain_len = chain.empty() ? 0.0 : chain.back().start_ds + chain.back().lane->length();
  if (chain_len < ds_end) {
    ds_end = std::max(chain_len, 0.0);
    end_is_stop = true;  // physical end of the known road
  }

  // --- remaining route length (diagnostics / goal tracking) ------------------------
  if (has_goal_) {
    double rem = -s_ref_;
    for (std::size_t i = idx_; i < plan_ids_.size(); ++i) {
      if (i == plan_ids_.size() - 1) {
        rem += goal_s_;
      } else if (!(i + 1 < plan_via_change_.size() && plan_via_change_[i + 1])) {
        rem += map_->lane(plan_ids_[i]).length();
      }
    }
    remaining_route_m_ = std::max(rem, 0.0);
  } else {
    remaining_route_m_ = std::numeric_limits<double>::infinity();
  }

  const auto chain_ds_of = [&chain](const std::string& lane_id, double s) {
    for (const auto& cl : chain)
      if (cl.lane->id == lane_id) return std::optional<double>(cl.start_ds + s);
    return std::optional<double>();
  };

  // --- signals -----------------------------------------------------------------
  // Latest speed sign already passed on the reference lane takes over the
  // active legal limit.
  double passed_best_s = -1.0;
  for (const auto& sig : view.signals) {
    if (sig.kind != SignalObservation::Kind::speed_limit) continue;
    if (sig.lane_id != ref->id || sig.s > s_ref_ + 1e-9) continue;
    if (sig.s > passed_best_s) {
      passed_best_s = sig.s;
      active_limit_ = sig.value;
    }
  }
  in.active_limit = active_limit_;

  struct SignAhead {
    double ds;
    double value;
  };
  std::vector<SignAhead> signs_ahead;
  struct StopAhead {
    double ds;
    std::string key;
  };
  std::vector<StopAhead> stops_ahead;
  for (const auto& sig : view.signals) {
    const auto ds = chain_ds_of(sig.lane_id, sig.s);
    if (!ds || *ds < -1e-9 || *ds > ds_end + 1e-9) continue;
    if (sig.kind == SignalObservation::Kind::speed_limit) {
      if (*ds > 1e-9) signs_ahead.push_back({*ds, sig.value});
    } else {
      const std::string key = stop_key(sig.lane_id, sig.s);
      if (!cleared_stops_.count(key)) stops_ahead.push_back({*ds, key});
    }
  }
  std::sort(signs_ahead.begin(), signs_ahead.end(),
            [](const SignAhead& a, const SignAhead& b) { return a.ds < b.ds; });
  std::sort(stops_ahead.begin(), stops_ahead.end(),
            [](const StopAhead& a, const StopAhead& b) { return a.ds < b.ds; });

  // --- stop-line wait-and-release ---------------------------------------------------
  if (!stops_ahead.empty()) {
    const StopAhead& nearest = stops_ahead.front();
    if (nearest.ds <= bp.s0 + params_.stop_reach && in.v < params_.v_stopped) {
      if (wait_key_ == nearest.key) {
        wait_t_ += dt;
      } else {
        wait_key_ = nearest.key;
        wait_t_ = dt;
      }
      if (wait_t_ >= params_.stop_wait) {
        cleared_stops_.insert(nearest.key);
        stops_ahead.erase(stops_ahead.begin());
        wait_key_.clear();
        wait_t_ = 0.0;
      }
    } else if (wait_key_ == nearest.key && in.v >= params_.v_stopped) {
      wait_key_.clear();
      wait_t_ = 0.0;
    }
  }

  // --- horizon points -----------------------------------------------------------
  std::vector<double> ds_list;
  for (double ds = 0.0; ds < ds_end - 1e-9; ds += params_.preview_spacing) ds_list.push_back(ds);
  ds_list.push_back(ds_end);
  for (const auto& sg : signs_ahead)
    if (sg.ds < ds_end) ds_list.push_back(sg.ds);
  for (const auto& st : stops_ahead)
    if (st.ds < ds_end) ds_list.push_back(st.ds);
  std::sort(ds_list.begin(), ds_list.end());
  ds_list.erase(std::unique(ds_list.begin(), ds_list.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-6; }),
                ds_list.end());

  const auto limit_at = [&](double ds) {
    std::optional<double> lim = active_limit_;
    for (const auto& sg : signs_ahead) {
      if (sg.ds <= ds + 1e-9)
        lim = sg.value;  // the most recent sign along the path wins
      else
        break;
    }
    return lim;
  };

  in.horizon.reserve(ds_list.size());
  for (const double ds : ds_list) {
    // Locate the chain lane containing ds.
    const ChainLane* cl = &chain.front();
    for (const auto& c : chain) {
      if (ds + 1e-9 >= c.start_ds) cl = &c;
      else break;
    }
    const double s_on = std::clamp(ds - cl->start_ds, 0.0, cl->lane->length());
    PathPoint pt;
    pt.ds = ds;
    pt.pos = cl->lane->centerline.point_at(s_on);
    pt.heading = cl->lane->centerline.heading_at(s_on);
    pt.kappa = cl->lane->curvature_at(s_on);
    std::optional<double> lim = limit_at(ds);
    if (cl->lane->speed_limit) lim = lim ? std::min(*lim, *cl->lane->speed_limit) : *cl->lane->speed_limit;
    pt.speed_limit = lim;
    in.horizon.push_back(pt);
  }
  for (const auto& st : stops_ahead) {
    for (auto& pt : in.horizon)
      if (std::abs(pt.ds - st.ds) < 1e-6) pt.stop = true;
  }
  if (end_is_stop && !in.horizon.empty()) in.horizon.back().stop = true;

  // --- lead selection -------------------------------------------------------------
  double best_ds = std::numeric_limits<double>::infinity();
  const MovingObjectState* lead = nullptr;
  for (const auto& obj : view.objects) {
    if (obj.id == view.ego_id || obj.lane_id.empty()) continue;
    const auto ds = chain_ds_of(obj.lane_id, obj.s);
    if (!ds || *ds <= 0.01 || *ds > ds_max) continue;
    if (*ds < best_ds) {
      best_ds = *ds;
      lead = &obj;
    }
  }
  if (lead) {
    const double gap = best_ds - 0.5 * (lead->length + ego->length);
    in.lead = LeadInfo{std::max(gap, 1e-3), lead->v};
  }

  // --- lane-change release ----------------------------------------------------------
  if (!gs.lc_active && idx_ + 1 < plan_ids_.size() && plan_via_change_[idx_ + 1]) {
    const Lane& target = map_->lane(plan_ids_[idx_ + 1]);
    // Window: remaining reference lane minus inflated crossing zones minus the
    // end margin; the change may start only inside the first free interval.
    const double margin = params_.lc_end_margin;
    std::vector<std::pair<double, double>> blocked = ref->crossing_zones;
    std::sort(blocked.begin(), blocked.end());
    double ws = s_ref_;
    double we = ref->length() - margin;
    for (const auto& [z0, z1] : blocked) {
      const double b0 = z0 - margin;
      if (z1 <= ws) continue;  // zone entirely behind the cursor
      if (b0 > ws) {
        we = std::min(we, b0);  // free gap before the next zone
        break;
      }
      ws = std::max(ws, z1);  // cursor sits inside an inflated zone; push past it
    }
    const bool in_window = ws <= s_ref_ + 1e-9 && s_ref_ < we;

    if (in_window) {
      // Safety gates on the target lane (s-aligned parallel lanes assumed).
      bool safe = true;
      for (const auto& obj : view.objects) {
        if (obj.id == view.ego_id || obj.lane_id != target.id) continue;
        const double half_lengths = 0.5 * (obj.length + ego->length);
        if (obj.s >= s_ref_) {
          if (obj.s - s_ref_ - half_lengths < params_.g_front) safe = false;
        } else {
          if (s_ref_ - obj.s - half_lengths < params_.g_rear) safe = false;
        }
      }
      if (safe) {
        const Vec2 ref_pt = ref->centerline.point_at(s_ref_);
        const double d_target = target.centerline.project(ref_pt).d;
        in.begin_lane_change = true;
        in.lane_change_width = -d_target;
        events_.lane_change_started = true;
      }
    }
  }

  return in;
}

}  // namespace agentsim
