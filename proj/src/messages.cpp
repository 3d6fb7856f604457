#include "agentsim/messages.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"
#include "agentsim/lane_map.hpp"

namespace agentsim {

using nlohmann::json;

namespace {

json to_json(const Pose2& p) {
  return json{{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}};
}

json to_json(const MovingObjectState& o) {
  return json{{"id", o.id},       {"pose", to_json(o.pose)}, {"v", o.v},
              {"a", o.a},         {"length", o.length},      {"width", o.width},
              {"lane_id", o.lane_id}, {"s", o.s}};
}

const char* kind_name(SignalObservation::Kind k) {
  return k == SignalObservation::Kind::speed_limit ? "speed_limit" : "stop_line";
}

json to_json(const SignalObservation& s) {
  return json{{"kind", kind_name(s.kind)},
              {"lane_id", s.lane_id},
              {"s", s.s},
              {"value", s.value}};
}

const char* action_name(TrafficAction::Type t) {
  return t == TrafficAction::Type::acquire_position ? "acquire_position" : "speed";
}

json to_json(const TrafficAction& a) {
  json j{{"type", action_name(a.type)}};
  if (a.type == TrafficAction::Type::acquire_position) {
    j["x"] = a.x;
    j["y"] = a.y;
  } else {
    j["v"] = a.v;
  }
  return j;
}

// --- decoding helpers -------------------------------------------------------

[[noreturn]] void fail(const std::string& context, const std::string& why) {
  throw DecodeError(context + ": " + why);
}

json parse_root(const std::string& bytes, const char* expected_type) {
  if (bytes.empty()) throw DecodeError(std::string(expected_type) + ": truncated input");
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    fail(expected_type, std::string("truncated or malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) fail(expected_type, "root is not an object");
  const auto it = j.find("type");
  if (it == j.end() || !it->is_string())
    fail(expected_type, "missing string field 'type'");
  if (it->get<std::string>() != expected_type)
    fail(expected_type, "unexpected type tag '" + it->get<std::string>() + "'");
  return j;
}

double get_num(const json& j, const char* field, const std::string& ctx) {
  const auto it = j.find(field);
  if (it == j.end()) fail(ctx, std::string("missing field '") + field + "'");
  if (!it->is_number()) fail(ctx, std::string("field '") + field + "' is not a number");
  return it->get<double>();
}

std::string get_str(const json& j, const char* field, const std::string& ctx) {
  const auto it = j.find(field);
  if (it == j.end()) fail(ctx, std::string("missing field '") + field + "'");
  if (!it->is_string()) fail(ctx, std::string("field '") + field + "' is not a string");
  return it->get<std::string>();
}

const json& get_arr(const json& j, const char* field, const std::string& ctx) {
  const auto it = j.find(field);
  if (it == j.end()) fail(ctx, std::string("missing field '") + field + "'");
  if (!it->is_array()) fail(ctx, std::string("field '") + field + "' is not an array");
  return *it;
}

Pose2 pose_from(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "pose is not an object");
  return Pose2{get_num(j, "x", ctx), get_num(j, "y", ctx), get_num(j, "yaw", ctx)};
}

MovingObjectState object_from(const json& j, const std::string& ctx) {
  MovingObjectState o;
  o.id = get_str(j, "id", ctx);
  const auto it = j.find("pose");
  if (it == j.end()) fail(ctx, "missing field 'pose'");
  o.pose = pose_from(*it, ctx + ".pose");
  o.v = get_num(j, "v", ctx);
  o.a = get_num(j, "a", ctx);
  o.length = get_num(j, "length", ctx);
  o.width = get_num(j, "width", ctx);
  o.lane_id = get_str(j, "lane_id", ctx);
  o.s = get_num(j, "s", ctx);
  return o;
}

SignalObservation signal_from(const json& j, const std::string& ctx) {
  SignalObservation s;
  const std::string kind = get_str(j, "kind", ctx);
  if (kind == "speed_limit") {
    s.kind = SignalObservation::Kind::speed_limit;
  } else if (kind == "stop_line") {
    s.kind = SignalObservation::Kind::stop_line;
  } else {
    fail(ctx, "unknown signal kind '" + kind + "'");
  }
  s.lane_id = get_str(j, "lane_id", ctx);
  s.s = get_num(j, "s", ctx);
  s.value = j.contains("value") ? get_num(j, "value", ctx) : 0.0;
  return s;
}

TrafficAction action_from(const json& j, const std::string& ctx) {
  TrafficAction a;
  const std::string type = get_str(j, "type", ctx);
  if (type == "acquire_position") {
    a.type = TrafficAction::Type::acquire_position;
    a.x = get_num(j, "x", ctx);
    a.y = get_num(j, "y", ctx);
  } else if (type == "speed") {
    a.type = TrafficAction::Type::speed;
    a.v = get_num(j, "v", ctx);
  } else {
    fail(ctx, "unknown action type '" + type + "'");
  }
  return a;
}

}  // namespace

std::string encode(const SensorView& m) {
  json objects = json::array();
  for (const auto& o : m.objects) objects.push_back(to_json(o));
  json signals = json::array();
  for (const auto& s : m.signals) signals.push_back(to_json(s));
  return json{{"type", "SensorView"},
              {"timestamp", m.timestamp},
              {"ego_id", m.ego_id},
              {"objects", objects},
              {"lanes_ref", m.lanes_ref},
              {"signals", signals}}
      .dump();
}

std::string encode(const TrafficCommand& m) {
  json actions = json::array();
  for (const auto& a : m.actions) actions.push_back(to_json(a));
  return json{{"type", "TrafficCommand"},
              {"timestamp", m.timestamp},
              {"agent_id", m.agent_id},
              {"actions", actions}}
      .dump();
}

std::string encode(const MotionRequest& m) {
  return json{{"type", "MotionRequest"},
              {"timestamp", m.timestamp},
              {"agent_id", m.agent_id},
              {"a_des", m.a_des},
              {"kappa_des", m.kappa_des}}
      .dump();
}

std::string encode(const TrafficUpdate& m) {
  return json{{"type", "TrafficUpdate"},
              {"timestamp", m.timestamp},
              {"state", to_json(m.state)}}
      .dump();
}

template <>
SensorView decode<SensorView>(const std::string& bytes) {
  const json j = parse_root(bytes, "SensorView");
  SensorView m;
  m.timestamp = get_num(j, "timestamp", "SensorView");
  m.ego_id = get_str(j, "ego_id", "SensorView");
  m.lanes_ref = get_str(j, "lanes_ref", "SensorView");
  std::size_t i = 0;
  for (const auto& o : get_arr(j, "objects", "SensorView"))
    m.objects.push_back(object_from(o, "SensorView.objects[" + std::to_string(i++) + "]"));
  i = 0;
  for (const auto& s : get_arr(j, "signals", "SensorView"))
    m.signals.push_back(signal_from(s, "SensorView.signals[" + std::to_string(i++) + "]"));
  return m;
}

template <>
TrafficCommand decode<TrafficCommand>(const std::string& bytes) {
  const json j = parse_root(bytes, "TrafficCommand");
  TrafficCommand m;
  m.timestamp = get_num(j, "timestamp", "TrafficCommand");
  m.agent_id = get_str(j, "agent_id", "TrafficCommand");
  std::size_t i = 0;
  for (const auto& a : get_arr(j, "actions", "TrafficCommand"))
    m.actions.push_back(action_from(a, "TrafficCommand.actions[" + std::to_string(i++) + "]"));
  return m;
}

template <>
MotionRequest decode<MotionRequest>(const std::string& bytes) {
  const json j = parse_root(bytes, "MotionRequest");
  MotionRequest m;
  m.timestamp = get_num(j, "timestamp", "MotionRequest");
  m.agent_id = get_str(j, "agent_id", "MotionRequest");
  m.a_des = get_num(j, "a_des", "MotionRequest");
  m.kappa_des = get_num(j, "kappa_des", "MotionRequest");
  return m;
}

template <>
TrafficUpdate decode<TrafficUpdate>(const std::string& bytes) {
  const json j = parse_root(bytes, "TrafficUpdate");
  TrafficUpdate m;
  m.timestamp = get_num(j, "timestamp", "TrafficUpdate");
  const auto it = j.find("state");
  if (it == j.end()) fail("TrafficUpdate", "missing field 'state'");
  m.state = object_from(*it, "TrafficUpdate.state");
  return m;
}

std::vector<ValidationFinding> validate_sensor_view(const SensorView& view,
                                                    const MapModel* map) {
  std::vector<ValidationFinding> out;
  const auto add = [&out](std::string field, std::string msg) {
    out.push_back({std::move(field), std::move(msg)});
  };

  if (view.ego_id.empty()) add("ego_id", "empty ego id");
  int ego_count = 0;
  for (std::size_t i = 0; i < view.objects.size(); ++i) {
    const auto& o = view.objects[i];
    const std::string f = "objects[" + std::to_string(i) + "]";
    if (o.id == view.ego_id) ++ego_count;
    if (!std::isfinite(o.pose.x) || !std::isfinite(o.pose.y) || !std::isfinite(o.pose.yaw))
      add(f + ".pose", "non-finite pose for '" + o.id + "'");
    if (o.pose.yaw <= -M_PI - 1e-9 || o.pose.yaw > M_PI + 1e-9)
      add(f + ".pose.yaw", "yaw outside (-pi, pi] for '" + o.id + "'");
    if (!(o.v >= 0.0) || !std::isfinite(o.v)) add(f + ".v", "negative or non-finite speed for '" + o.id + "'");
    if (!(o.length > 0.0) || !(o.width > 0.0))
      add(f, "non-positive dimensions for '" + o.id + "'");
    if (map && !o.lane_id.empty()) {
      if (!map->has_lane(o.lane_id)) {
        add(f + ".lane_id", "unknown lane '" + o.lane_id + "'");
      } else if (o.s < -1e-9 || o.s > map->lane(o.lane_id).length() + 1e-9) {
        add(f + ".s", "s outside the lane for '" + o.id + "'");
      }
    }
  }
  if (ego_count == 0) add("objects", "ego '" + view.ego_id + "' not present");
  if (ego_count > 1) add("objects", "ego '" + view.ego_id + "' present " + std::to_string(ego_count) + " times");

  for (std::size_t i = 0; i < view.signals.size(); ++i) {
    const auto& s = view.signals[i];
    const std::string f = "signals[" + std::to_string(i) + "]";
    if (map) {
      if (!map->has_lane(s.lane_id)) {
        add(f + ".lane_id", "unknown lane '" + s.lane_id + "'");
      } else if (s.s < -1e-9 || s.s > map->lane(s.lane_id).length() + 1e-9) {
        add(f + ".s", "s outside the lane");
      }
    }
    if (s.kind == SignalObservation::Kind::speed_limit && !(s.value > 0.0))
      add(f + ".value", "speed limit must be positive");
  }
  if (!std::isfinite(view.timestamp)) add("timestamp", "non-finite timestamp");
  return out;
}

}  // namespace agentsim
