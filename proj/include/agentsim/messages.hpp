#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agentsim {

struct MapModel;  // lane_map.hpp

/// Planar pose; yaw in radians, normalized to (-pi, pi].
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double yaw{0.0};

  bool operator==(const Pose2&) const = default;
};

/// Ground-truth state of one traffic participant.
struct MovingObjectState {
  std::string id;
  Pose2 pose;
  double v{0.0};       // m/s, along heading
  double a{0.0};       // m/s^2, realized
  double length{4.2};  // m
  double width{1.8};   // m
  std::string lane_id; // empty when not seated on a lane
  double s{0.0};       // arc length along lane_id, m

  bool operator==(const MovingObjectState&) const = default;
};

/// Static road furniture observed around the ego.
struct SignalObservation {
  enum class Kind { speed_limit, stop_line };

  Kind kind{Kind::speed_limit};
  std::string lane_id;
  double s{0.0};
  double value{0.0};  // m/s for speed_limit, unused for stop_line

  bool operator==(const SignalObservation&) const = default;
};

/// Per-agent world snapshot delivered to a component each step.
struct SensorView {
  double timestamp{0.0};
  std::string ego_id;
  std::vector<MovingObjectState> objects;  // includes the ego
  std::string lanes_ref;                   // map version token
  std::vector<SignalObservation> signals;

  bool operator==(const SensorView&) const = default;
};

/// One steering directive inside a TrafficCommand.
struct TrafficAction {
  enum class Type { acquire_position, speed };

  Type type{Type::acquire_position};
  double x{0.0};  // acquire_position: global goal position
  double y{0.0};
  double v{0.0};  // speed: target speed, m/s

  bool operator==(const TrafficAction&) const = default;
};

/// Event-driven scenario directive for one agent; persists until superseded.
struct TrafficCommand {
  double timestamp{0.0};
  std::string agent_id;
  std::vector<TrafficAction> actions;

  bool operator==(const TrafficCommand&) const = default;
};

/// Desired motion from the behavior layer (consumed when dynamics is bypassed).
struct MotionRequest {
  double timestamp{0.0};
  std::string agent_id;
  double a_des{0.0};      // m/s^2
  double kappa_des{0.0};  // 1/m, left positive

  bool operator==(const MotionRequest&) const = default;
};

/// Authoritative state the component reports back after a step.
struct TrafficUpdate {
  double timestamp{0.0};
  MovingObjectState state;

  bool operator==(const TrafficUpdate&) const = default;
};

/// Serializes a message to its JSON wire form (UTF-8 text, type-tagged).
std::string encode(const SensorView& m);
std::string encode(const TrafficCommand& m);
std::string encode(const MotionRequest& m);
std::string encode(const TrafficUpdate& m);

/// Parses a message of the requested type. Throws DecodeError on truncated or
/// malformed input, wrong type tag, or missing/ill-typed fields.
template <typename T>
T decode(const std::string& bytes);

template <> SensorView decode<SensorView>(const std::string& bytes);
template <> TrafficCommand decode<TrafficCommand>(const std::string& bytes);
template <> MotionRequest decode<MotionRequest>(const std::string& bytes);
template <> TrafficUpdate decode<TrafficUpdate>(const std::string& bytes);

/// One consistency finding from validate_sensor_view.
struct ValidationFinding {
  std::string field;
  std::string message;
};

/// Checks a view against basic sanity rules and, when a map is given, lane
/// referential integrity. Collects findings instead of aborting.
std::vector<ValidationFinding> validate_sensor_view(const SensorView& view,
                                                    const MapModel* map = nullptr);

}  // namespace agentsim
