#include "agentsim/host.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"

namespace agentsim {

using nlohmann::json;

// --- BufferRegistry ---------------------------------------------------------------

BufferHandle BufferRegistry::put(std::string bytes) {
  std::lock_guard<std::mutex> lock(mu_);
  const BufferHandle h = next_++;
  buffers_.emplace(h, std::move(bytes));
  return h;
}

const std::string& BufferRegistry::get(BufferHandle handle) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = buffers_.find(handle);
  if (it == buffers_.end()) throw HostError("unknown buffer handle " + std::to_string(handle));
  return it->second;
}

void BufferRegistry::release(BufferHandle handle) {
  std::lock_guard<std::mutex> lock(mu_);
  if (buffers_.erase(handle) == 0)
    throw HostError("release of unknown buffer handle " + std::to_string(handle));
}

std::size_t BufferRegistry::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return buffers_.size();
}

// --- descriptor -------------------------------------------------------------------

std::string descriptor_to_json(const ComponentDescriptor& d) {
  json j;
  j["name"] = d.name;
  j["version"] = d.version;
  j["inputs"] = json::array();
  for (const auto& p : d.inputs) j["inputs"].push_back({{"name", p.name}, {"type", p.type}});
  j["outputs"] = json::array();
  for (const auto& p : d.outputs) j["outputs"].push_back({{"name", p.name}, {"type", p.type}});
  j["parameters"] = json::array();
  for (const auto& p : d.parameters) {
    j["parameters"].push_back({{"name", p.name},
                               {"default", p.value},
                               {"min", p.min},
                               {"max", p.max},
                               {"unit", p.unit},
                               {"description", p.description}});
  }
  return j.dump(2);
}

namespace {

ParameterBinding bind(const char* name, double* (*field)(AgentParameters&), double min, double max,
                      const char* unit, const char* description) {
  AgentParameters defaults;
  ParameterBinding b;
  b.spec.name = name;
  b.spec.value = *field(defaults);
  b.spec.min = min;
  b.spec.max = max;
  b.spec.unit = unit;
  b.spec.description = description;
  b.field = field;
  return b;
}

}  // namespace

const std::vector<ParameterBinding>& parameter_bindings() {
  static const std::vector<ParameterBinding> table = {
      // longitudinal behavior
      bind("behavior.v_desired", [](AgentParameters& p) { return &p.behavior.v_desired; }, 0.0, 70.0,
           "m/s", "desired free-flow speed"),
      bind("behavior.T", [](AgentParameters& p) { return &p.behavior.T; }, 0.1, 10.0, "s",
           "target time headway when following"),
      bind("behavior.s0", [](AgentParameters& p) { return &p.behavior.s0; }, 0.0, 10.0, "m",
           "standstill distance kept to a stopped leader"),
      bind("behavior.a", [](AgentParameters& p) { return &p.behavior.a; }, 0.1, 6.0, "m/s^2",
           "approach acceleration scale in the follow reaction"),
      bind("behavior.b", [](AgentParameters& p) { return &p.behavior.b; }, 0.1, 6.0, "m/s^2",
           "comfortable braking scale in the follow reaction"),
      bind("behavior.a_max", [](AgentParameters& p) { return &p.behavior.a_max; }, 0.1, 8.0, "m/s^2",
           "maximum commanded acceleration"),
      bind("behavior.delta", [](AgentParameters& p) { return &p.behavior.delta; }, 1.0, 10.0, "",
           "free-flow reaction exponent"),
      bind("behavior.T_max", [](AgentParameters& p) { return &p.behavior.T_max; }, 1.0, 30.0, "s",
           "preview horizon as travel time at current speed"),
      bind("behavior.a_lat_max", [](AgentParameters& p) { return &p.behavior.a_lat_max; }, 0.1, 10.0,
           "m/s^2", "lateral acceleration bound used for curve speeds"),
      bind("behavior.a_pred", [](AgentParameters& p) { return &p.behavior.a_pred; }, 0.1, 6.0,
           "m/s^2", "deceleration assumed when approaching a slower speed constraint"),
      bind("behavior.t_ff", [](AgentParameters& p) { return &p.behavior.t_ff; }, 0.0, 10.0, "s",
           "feed-forward lead time before a speed constraint"),
      bind("behavior.limit_margin", [](AgentParameters& p) { return &p.behavior.limit_margin; }, 0.0,
           0.5, "", "fraction kept below posted or curve speed constraints"),
      // lateral behavior
      bind("behavior.k_near", [](AgentParameters& p) { return &p.behavior.k_near; }, 0.0, 2.0,
           "1/(m*rad)", "near-point steering gain"),
      bind("behavior.k_far", [](AgentParameters& p) { return &p.behavior.k_far; }, 0.0, 2.0,
           "1/(m*rad)", "far-point steering gain"),
      bind("behavior.k_damp", [](AgentParameters& p) { return &p.behavior.k_damp; }, 0.0, 2.0,
           "s/(m*rad)", "near-point angular-rate damping gain"),
      bind("behavior.d_near0", [](AgentParameters& p) { return &p.behavior.d_near0; }, 0.0, 50.0, "m",
           "near-point base distance"),
      bind("behavior.t_near", [](AgentParameters& p) { return &p.behavior.t_near; }, 0.0, 5.0, "s",
           "near-point distance gain with speed"),
      bind("behavior.d_far0", [](AgentParameters& p) { return &p.behavior.d_far0; }, 0.0, 100.0, "m",
           "far-point base distance"),
      bind("behavior.t_far", [](AgentParameters& p) { return &p.behavior.t_far; }, 0.0, 10.0, "s",
           "far-point distance gain with speed"),
      bind("behavior.kappa_max", [](AgentParameters& p) { return &p.behavior.kappa_max; }, 0.01, 2.0,
           "1/m", "curvature command clamp"),
      bind("behavior.lc_duration", [](AgentParameters& p) { return &p.behavior.lc_duration; }, 1.0,
           15.0, "s", "lane change duration"),
      bind("behavior.lateral_bias", [](AgentParameters& p) { return &p.behavior.lateral_bias; }, -1.0,
           1.0, "m", "steady lateral offset from the lane center"),
      // vehicle dynamics and low-level control
      bind("dynamics.wheelbase", [](AgentParameters& p) { return &p.dynamics.wheelbase; }, 1.0, 6.0,
           "m", "kinematic wheelbase"),
      bind("dynamics.pedal_gain", [](AgentParameters& p) { return &p.dynamics.pedal_gain; }, 0.5,
           20.0, "m/s^2", "acceleration produced by full pedal"),
      bind("dynamics.a_min", [](AgentParameters& p) { return &p.dynamics.a_min; }, -10.0, -0.5,
           "m/s^2", "strongest reachable deceleration"),
      bind("dynamics.a_max_act", [](AgentParameters& p) { return &p.dynamics.a_max_act; }, 0.5, 10.0,
           "m/s^2", "strongest reachable acceleration"),
      bind("dynamics.steer_max", [](AgentParameters& p) { return &p.dynamics.steer_max; }, 0.1, 1.5,
           "rad", "steering angle clamp"),
      bind("dynamics.pid_long_kp", [](AgentParameters& p) { return &p.dynamics.pid_long_kp; }, 0.0,
           100.0, "", "pedal controller proportional gain"),
      bind("dynamics.pid_long_ki", [](AgentParameters& p) { return &p.dynamics.pid_long_ki; }, 0.0,
           100.0, "", "pedal controller integral gain"),
      bind("dynamics.pid_long_kd", [](AgentParameters& p) { return &p.dynamics.pid_long_kd; }, 0.0,
           100.0, "", "pedal controller derivative gain"),
      bind("dynamics.pid_lat_kp", [](AgentParameters& p) { return &p.dynamics.pid_lat_kp; }, 0.0,
           100.0, "", "steering-rate controller proportional gain"),
      bind("dynamics.pid_lat_ki", [](AgentParameters& p) { return &p.dynamics.pid_lat_ki; }, 0.0,
           100.0, "", "steering-rate controller integral gain"),
      bind("dynamics.pid_lat_kd", [](AgentParameters& p) { return &p.dynamics.pid_lat_kd; }, 0.0,
           100.0, "", "steering-rate controller derivative gain"),
      // guidance
      bind("adapter.preview_spacing", [](AgentParameters& p) { return &p.adapter.preview_spacing; },
           0.5, 10.0, "m", "spacing of regular preview points"),
      bind("adapter.min_horizon", [](AgentParameters& p) { return &p.adapter.min_horizon; }, 5.0,
           100.0, "m", "minimum preview length at low speed"),
      bind("adapter.g_front", [](AgentParameters& p) { return &p.adapter.g_front; }, 0.0, 50.0, "m",
           "front gap required on the target lane before a lane change"),
      bind("adapter.g_rear", [](AgentParameters& p) { return &p.adapter.g_rear; }, 0.0, 50.0, "m",
           "rear gap required on the target lane before a lane change"),
      bind("adapter.lc_end_margin", [](AgentParameters& p) { return &p.adapter.lc_end_margin; }, 0.0,
           50.0, "m", "buffer kept to crossing zones and the lane end when changing lanes"),
      bind("adapter.stop_wait", [](AgentParameters& p) { return &p.adapter.stop_wait; }, 0.0, 30.0,
           "s", "standstill time at a stop line before it is released"),
      bind("adapter.v_stopped", [](AgentParameters& p) { return &p.adapter.v_stopped; }, 0.01, 2.0,
           "m/s", "speed below which the vehicle counts as stopped"),
      bind("adapter.stop_reach", [](AgentParameters& p) { return &p.adapter.stop_reach; }, 0.5, 20.0,
           "m", "distance to a stop line within which waiting counts"),
      bind("adapter.lane_change_penalty",
           [](AgentParameters& p) { return &p.adapter.lane_change_penalty; }, 0.0, 100.0, "m",
           "route cost added per lane change"),
      bind("adapter.goal_tolerance", [](AgentParameters& p) { return &p.adapter.goal_tolerance; },
           0.5, 20.0, "m", "distance at which a goal counts as reached"),
      bind("adapter.d_max", [](AgentParameters& p) { return &p.adapter.d_max; }, 1.0, 50.0, "m",
           "maximum lateral distance for projecting positions onto lanes"),
  };
  return table;
}

ComponentDescriptor agent_descriptor() {
  ComponentDescriptor d;
  d.name = "agentsim.driver";
  d.version = "0.1.0";
  d.inputs = {{"SensorView", "json"}, {"TrafficCommand", "json"}};
  d.outputs = {{"TrafficUpdate", "json"}, {"MotionRequest", "json"}, {"DebugState", "json"}};
  for (const auto& b : parameter_bindings()) d.parameters.push_back(b.spec);
  return d;
}

const char* to_string(ComponentState s) {
  switch (s) {
    case ComponentState::instantiated: return "instantiated";
    case ComponentState::initialized: return "initialized";
    case ComponentState::stepping: return "stepping";
    case ComponentState::terminated: return "terminated";
  }
  return "unknown";
}

// --- record serialization ------------------------------------------------------------

std::string records_to_json(const std::vector<StepRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    arr.push_back({{"t", r.t},
                   {"dt", r.dt},
                   {"view", r.view},
                   {"command", r.command},
                   {"update", r.update},
                   {"request", r.request},
                   {"debug", r.debug}});
  }
  return arr.dump();
}

std::vector<StepRecord> records_from_json(const std::string& bytes) {
  json arr = json::parse(bytes, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) throw DecodeError("malformed step record stream");
  std::vector<StepRecord> out;
  for (const auto& j : arr) {
    StepRecord r;
    r.t = j.at("t").get<double>();
    r.dt = j.at("dt").get<double>();
    r.view = j.at("view").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.update = j.at("update").get<std::string>();
    r.request = j.at("request").get<std::string>();
    r.debug = j.at("debug").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// --- AgentComponent --------------------------------------------------------------------

AgentComponent::AgentComponent(std::string instance_name) : name_(std::move(instance_name)) {}

void AgentComponent::require(bool cond, const std::string& what) const {
  if (!cond) throw HostError(name_ + ": " + what);
}

void AgentComponent::set_parameter(const std::string& name, double value) {
  require(state_ != ComponentState::terminated, "set_parameter after terminate");
  for (const auto& b : parameter_bindings()) {
    if (b.spec.name != name) continue;
    if (!(value >= b.spec.min && value <= b.spec.max) || !std::isfinite(value))
      throw HostError(name_ + ": parameter '" + name + "' value " + std::to_string(value) +
                      " outside [" + std::to_string(b.spec.min) + ", " + std::to_string(b.spec.max) +
                      "]");
    pending_[name] = value;
    return;
  }
  throw HostError(name_ + ": unknown parameter '" + name + "'");
}

void AgentComponent::apply_pending_parameters() {
  if (pending_.empty()) return;
  for (const auto& [name, value] : pending_) {
    for (const auto& b : parameter_bindings()) {
      if (b.spec.name == name) {
        *b.field(params_) = value;
        break;
      }
    }
  }
  pending_.clear();
  adapter_.configure(params_.adapter);
  dyn_.configure(params_.dynamics);
}

void AgentComponent::init(const MapModel* map, const MovingObjectState& initial_state, double t0) {
  require(state_ == ComponentState::instantiated, "init from state " + std::string(to_string(state_)));
  require(map != nullptr, "init without a map");
  map_ = map;
  initial_state_ = initial_state;
  agent_id_ = initial_state.id;
  t0_ = t0;
  apply_pending_parameters();
  adapter_.configure(params_.adapter);
  adapter_.set_map(map_);
  dyn_.configure(params_.dynamics);
  dyn_.reset();
  vehicle_ = {};
  vehicle_.pose = initial_state.pose;
  vehicle_.v = initial_state.v;
  gs_ = {};
  stab_ = {};
  state_ = ComponentState::initialized;
}

void AgentComponent::reset() {
  require(state_ == ComponentState::initialized || state_ == ComponentState::stepping,
          "reset from state " + std::string(to_string(state_)));
  apply_pending_parameters();
  adapter_.reset();
  adapter_.configure(params_.adapter);
  adapter_.set_map(map_);
  dyn_.configure(params_.dynamics);
  dyn_.reset();
  vehicle_ = {};
  vehicle_.pose = initial_state_.pose;
  vehicle_.v = initial_state_.v;
  gs_ = {};
  stab_ = {};
  view_ = {};
  has_view_ = false;
  view_bytes_.clear();
  pending_cmd_.reset();
  command_bytes_.clear();
  update_ = {};
  request_ = {};
  has_output_ = false;
  records_.clear();
  state_ = ComponentState::initialized;
}

void AgentComponent::terminate() { state_ = ComponentState::terminated; }

void AgentComponent::set_input(const std::string& port, const std::string& bytes) {
  require(state_ == ComponentState::initialized || state_ == ComponentState::stepping,
          "set_input from state " + std::string(to_string(state_)));
  if (port == "SensorView") {
    view_ = decode<SensorView>(bytes);
    has_view_ = true;
    view_bytes_ = bytes;
  } else if (port == "TrafficCommand") {
    pending_cmd_ = decode<TrafficCommand>(bytes);
    command_bytes_ = bytes;
  } else {
    throw HostError(name_ + ": unknown input port '" + port + "'");
  }
}

void AgentComponent::set_view(const SensorView& view) {
  require(state_ == ComponentState::initialized || state_ == ComponentState::stepping,
          "set_view from state " + std::string(to_string(state_)));
  view_ = view;
  has_view_ = true;
  view_bytes_.clear();
}

void AgentComponent::set_command(const TrafficCommand& cmd) {
  require(state_ == ComponentState::initialized || state_ == ComponentState::stepping,
          "set_command from state " + std::string(to_string(state_)));
  pending_cmd_ = cmd;
  command_bytes_.clear();
}

void AgentComponent::do_step(double t, double dt) {
  require(state_ == ComponentState::initialized || state_ == ComponentState::stepping,
          "do_step from state " + std::string(to_string(state_)));
  require(has_view_, "do_step without a SensorView input");
  require(dt >= 0.0 && std::isfinite(dt), "do_step with invalid dt");
  state_ = ComponentState::stepping;
  apply_pending_parameters();

  // A routing command received mid lane-change is deferred until the change
  // completes, so the new route starts from a settled reference lane.
  std::string consumed_cmd_bytes;
  if (pending_cmd_) {
    bool has_acquire = false;
    for (const auto& a : pending_cmd_->actions)
      if (a.type == TrafficAction::Type::acquire_position) has_acquire = true;
    if (!gs_.lc_active || !has_acquire) {
      adapter_.apply_command(*pending_cmd_, vehicle_.pose);
      consumed_cmd_bytes = command_bytes_.empty() && recording_ ? encode(*pending_cmd_)
                                                                : command_bytes_;
      pending_cmd_.reset();
      command_bytes_.clear();
    }
  }

  last_input_ = adapter_.build(view_, gs_, params_.behavior, t, dt);
  stab_ = step_behavior(last_input_, gs_, params_.behavior);
  vehicle_ = dyn_.step(vehicle_, stab_.a_des, stab_.kappa_des, dt);

  update_.timestamp = t + dt;
  update_.state = initial_state_;
  update_.state.pose = vehicle_.pose;
  update_.state.v = vehicle_.v;
  update_.state.a = vehicle_.a;
  update_.state.lane_id = adapter_.reference_lane();
  update_.state.s = adapter_.reference_s();
  request_ = MotionRequest{t + dt, agent_id_, stab_.a_des, stab_.kappa_des};
  has_output_ = true;

  if (recording_) {
    StepRecord rec;
    rec.t = t;
    rec.dt = dt;
    rec.view = view_bytes_.empty() ? encode(view_) : view_bytes_;
    rec.command = consumed_cmd_bytes;
    rec.update = encode(update_);
    rec.request = encode(request_);
    rec.debug = debug_json();
    records_.push_back(std::move(rec));
  }
}

std::string AgentComponent::output(const std::string& port) const {
  require(has_output_, "output requested before the first step");
  if (port == "TrafficUpdate") return encode(update_);
  if (port == "MotionRequest") return encode(request_);
  if (port == "DebugState") return debug_json();
  throw HostError(name_ + ": unknown output port '" + port + "'");
}

std::string AgentComponent::debug_json() const {
  json j;
  j["type"] = "DebugState";
  j["timestamp"] = update_.timestamp;
  j["agent_id"] = agent_id_;
  j["a_des"] = stab_.a_des;
  j["kappa_des"] = stab_.kappa_des;
  j["v_t_local"] = stab_.v_T_local;
  j["v_t_pred"] = stab_.v_T_pred;
  j["r_free"] = stab_.r_free;
  j["r_follow"] = stab_.r_follow;
  j["r_stop"] = stab_.r_stop;
  j["thw"] = std::isfinite(stab_.thw) ? stab_.thw : -1.0;
  j["lc_u"] = stab_.lc_u;
  j["offset_target"] = stab_.offset_target;
  j["pedal"] = vehicle_.pedal;
  j["steer"] = vehicle_.steer;
  const double rem = adapter_.remaining_route_m();
  j["remaining_route_m"] = std::isfinite(rem) ? rem : -1.0;
  j["diagnostics"] = adapter_.diagnostics();
  return j.dump();
}

}  // namespace agentsim
