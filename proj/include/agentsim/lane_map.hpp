#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentsim/geometry.hpp"
#include "agentsim/messages.hpp"

namespace agentsim {

/// One directed lane: centerline polyline plus graph links.
struct Lane {
  std::string id;
  Polyline centerline;
  double width{3.5};
  std::optional<double> speed_limit;  // m/s, static lane-wide limit
  std::vector<std::string> successors;
  std::optional<std::string> left_neighbor;
  std::optional<std::string> right_neighbor;
  std::vector<std::pair<double, double>> crossing_zones;  // [s0, s1] intervals

  double length() const { return centerline.length(); }
  /// Signed curvature at arc length s: discrete three-point estimate at the
  /// vertices, linearly interpolated in s, clamped at the ends.
  double curvature_at(double s) const;
};

/// Immutable lane graph loaded from JSON.
struct MapModel {
  std::string version;
  std::map<std::string, Lane> lanes;  // ordered: deterministic iteration
  std::vector<SignalObservation> signals;

  bool has_lane(const std::string& id) const { return lanes.count(id) > 0; }
  const Lane& lane(const std::string& id) const;
};

/// Ordered lane traversal between two on-lane positions.
struct Route {
  struct Step {
    std::string lane_id;
    bool via_lane_change{false};  // reached from the previous step by a neighbor edge
  };
  std::vector<Step> steps;
  double start_s{0.0};  // on steps.front()
  double goal_s{0.0};   // on steps.back()
  double cost{0.0};     // traversed arc length + lane-change penalties
  int lane_changes{0};
};

/// Result of projecting a world position onto the map.
struct LaneProjection {
  std::string lane_id;
  double s{0.0};
  double d{0.0};  // left-of-travel positive
};

/// Parses and cross-validates a map file. Throws ParseError with file/field
/// context on syntax errors, bad geometry, dangling ids or asymmetric
/// neighbor links.
MapModel load_map(const std::string& path);
MapModel load_map_from_json(const std::string& text, const std::string& context = "map");

/// Serializes a map back to its JSON file form.
std::string map_to_json(const MapModel& map);

/// Cheapest lane sequence from (from_lane, from_s) to (to_lane, to_s).
/// Cost: traversed arc length; a neighbor edge costs lane_change_penalty and
/// keeps the current s (the next successor hop then pays the remaining length
/// of the lane actually driven). Ties break by fewer lane changes, then the
/// lexicographically smaller lane-id sequence.
/// Throws NoRouteError when the goal is unreachable.
Route shortest_route(const MapModel& map, const std::string& from_lane, double from_s,
                     const std::string& to_lane, double to_s,
                     double lane_change_penalty = 5.0);

/// Nearest-lane projection of a world position. Ties break by smaller |d|,
/// then lane id. Throws OffRoadError when no lane is within d_max.
LaneProjection project(const MapModel& map, const Vec2& position, double d_max = 10.0);

/// Single-lane test road with curvature profile
/// 0 -> linear ramp -> 1/r_arc -> linear ramp -> 0 (line, spiral, arc,
/// spiral, line). The arc subtends arc_angle radians. Clothoid spirals are
/// generated by numeric heading integration at 0.5 m steps.
MapModel generate_test_road(double r_arc, double spiral_len, double line_len,
                            double lane_width = 3.5, double arc_angle = M_PI / 2.0);

/// Four-arm right-hand intersection: per arm one approach lane (into the
/// junction) and one exit lane, connected by right-turn quarter-arc
/// connector lanes. Used by multi-agent fixtures.
MapModel generate_intersection(double arm_len = 160.0, double turn_radius = 12.0,
                               double lane_width = 3.5);

}  // namespace agentsim
