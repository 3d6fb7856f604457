#pragma once

#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentsim/behavior.hpp"
#include "agentsim/lane_map.hpp"
#include "agentsim/messages.hpp"

namespace agentsim {

struct AdapterParameters {
  double preview_spacing{2.0};     // m between regular horizon points
  double min_horizon{20.0};        // m, lower bound of the preview length
  double g_front{10.0};            // m, required front gap on the target lane
  double g_rear{15.0};             // m, required rear gap on the target lane
  double lc_end_margin{10.0};      // m, change must complete before zones/lane end
  double stop_wait{2.0};           // s at standstill before a stop line clears
  double v_stopped{0.2};           // m/s, standstill threshold
  double stop_reach{5.0};          // m beyond s0 within which waiting counts
  double lane_change_penalty{5.0}; // m-equivalent routing cost per change
  double goal_tolerance{3.0};      // m, goal-reached radius along the lane
  double d_max{10.0};              // m, projection radius for goal positions
};

/// Per-step adapter outcome beyond the DriverInput itself.
struct AdapterEvents {
  bool lane_change_started{false};
  bool lane_change_completed{false};
  bool command_rejected{false};
};

/// Translates world snapshots and scenario commands into the driver-model
/// input: route following, virtual horizon with event points, lead selection,
/// lane-change windows and stop-line bookkeeping. One instance per agent;
/// state persists across steps.
class DriverAdapter {
 public:
  void configure(const AdapterParameters& p) { params_ = p; }
  void set_map(const MapModel* map) { map_ = map; }
  void reset();

  /// Applies a scenario command given the current ego seat. Rejected actions
  /// (off-road or unreachable goals) keep the previous goal and add a
  /// diagnostic.
  void apply_command(const TrafficCommand& cmd, const Pose2& ego_pose);

  /// Builds the behavior input for this tick. Mutates guidance (reference-lane
  /// switch at half lane-change progress) and stop-line wait state.
  DriverInput build(const SensorView& view, GuidanceState& gs,
                    const BehaviorParameters& bp, double t, double dt);

  const AdapterEvents& events() const { return events_; }
  void clear_events() { events_ = {}; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  bool has_goal() const { return has_goal_; }
  double remaining_route_m() const { return remaining_route_m_; }
  const std::string& reference_lane() const { return plan_ids_.empty() ? empty_ : plan_ids_[idx_]; }
  double reference_s() const { return s_ref_; }
  std::optional<double> v_command() const { return v_command_; }
  std::optional<double> active_limit() const { return active_limit_; }

 private:
  void build_default_plan(const std::string& from_lane);
  void extend_plan_greedy(double needed_m);
  std::string stop_key(const std::string& lane, double s) const;

  AdapterParameters params_;
  const MapModel* map_{nullptr};

  std::vector<std::string> plan_ids_;
  std::vector<bool> plan_via_change_;
  std::size_t idx_{0};
  bool has_goal_{false};
  double goal_s_{0.0};
  std::string goal_lane_;
  double s_ref_{0.0};

  std::optional<double> v_command_;
  std::optional<double> active_limit_;
  std::set<std::string> cleared_stops_;
  std::string wait_key_;
  double wait_t_{0.0};
  double remaining_route_m_{std::numeric_limits<double>::infinity()};

  AdapterEvents events_;
  std::vector<std::string> diagnostics_;
  const std::string empty_;
};

}  // namespace agentsim
