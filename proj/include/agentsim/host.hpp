#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentsim/adapter.hpp"
#include "agentsim/behavior.hpp"
#include "agentsim/dynamics.hpp"
#include "agentsim/lane_map.hpp"
#include "agentsim/messages.hpp"

namespace agentsim {

using BufferHandle = std::uint64_t;

/// Thread-safe registry of opaque byte buffers exchanged across the component
/// boundary. Handles are never reused within one registry's lifetime.
class BufferRegistry {
 public:
  BufferHandle put(std::string bytes);
  const std::string& get(BufferHandle handle) const;
  void release(BufferHandle handle);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<BufferHandle, std::string> buffers_;
  BufferHandle next_ = 1;
};

struct PortSpec {
  std::string name;
  std::string type;
};

struct ParameterSpec {
  std::string name;
  double value = 0.0;  // default
  double min = 0.0;
  double max = 0.0;
  std::string unit;
  std::string description;
};

struct ComponentDescriptor {
  std::string name;
  std::string version;
  std::vector<PortSpec> inputs;
  std::vector<PortSpec> outputs;
  std::vector<ParameterSpec> parameters;
};

std::string descriptor_to_json(const ComponentDescriptor& d);

/// Full parameter set of one hosted agent.
struct AgentParameters {
  BehaviorParameters behavior;
  DynamicsParameters dynamics;
  AdapterParameters adapter;
};

struct ParameterBinding {
  ParameterSpec spec;
  double* (*field)(AgentParameters&);
};

/// Single source of truth for all tunable parameters: dotted names, defaults,
/// ranges, units. The descriptor, the CLI overrides, and the parameter docs all
/// derive from this table.
const std::vector<ParameterBinding>& parameter_bindings();

ComponentDescriptor agent_descriptor();

enum class ComponentState { instantiated, initialized, stepping, terminated };

const char* to_string(ComponentState s);

/// One step's worth of boundary traffic, for record/replay.
struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  std::string view;     // input bytes; empty if the port was never set
  std::string command;  // input bytes; empty if no command was pending
  std::string update;
  std::string request;
  std::string debug;
};

std::string records_to_json(const std::vector<StepRecord>& records);
std::vector<StepRecord> records_from_json(const std::string& bytes);

/// Packaged driver agent: guidance + stabilization + vehicle dynamics behind a
/// byte-buffer interface with an explicit lifecycle.
class AgentComponent {
 public:
  explicit AgentComponent(std::string instance_name = "agent");

  ComponentState state() const { return state_; }
  const std::string& name() const { return name_; }
  const AgentParameters& parameters() const { return params_; }

  /// Queued until the next step boundary (or until init/reset).
  void set_parameter(const std::string& name, double value);

  void init(const MapModel* map, const MovingObjectState& initial_state, double t0);
  void reset();
  void terminate();

  // Byte-buffer interface. Ports: in "SensorView", "TrafficCommand";
  // out "TrafficUpdate", "MotionRequest", "DebugState".
  void set_input(const std::string& port, const std::string& bytes);
  void do_step(double t, double dt);
  std::string output(const std::string& port) const;

  // Typed interface used by the in-process simulation loop.
  void set_view(const SensorView& view);
  void set_command(const TrafficCommand& cmd);
  const TrafficUpdate& update() const { return update_; }
  const MotionRequest& request() const { return request_; }
  const VehicleState& vehicle() const { return vehicle_; }
  const GuidanceState& guidance() const { return gs_; }
  const StabilizationOutput& stabilization() const { return stab_; }
  DriverAdapter& adapter() { return adapter_; }
  const DriverAdapter& adapter() const { return adapter_; }
  const std::string& agent_id() const { return agent_id_; }

  void set_recording(bool on) { recording_ = on; }
  const std::vector<StepRecord>& records() const { return records_; }
  std::string debug_json() const;

 private:
  void apply_pending_parameters();
  void require(bool cond, const std::string& what) const;

  std::string name_;
  ComponentState state_ = ComponentState::instantiated;
  AgentParameters params_;
  std::map<std::string, double> pending_;

  const MapModel* map_ = nullptr;
  std::string agent_id_;
  MovingObjectState initial_state_;
  double t0_ = 0.0;

  DriverAdapter adapter_;
  DynamicsController dyn_;
  GuidanceState gs_;
  VehicleState vehicle_;
  StabilizationOutput stab_;
  DriverInput last_input_;

  SensorView view_;
  bool has_view_ = false;
  std::string view_bytes_;
  std::optional<TrafficCommand> pending_cmd_;
  std::string command_bytes_;
  bool deferred_cmd_note_ = false;

  TrafficUpdate update_;
  MotionRequest request_;
  bool has_output_ = false;

  bool recording_ = false;
  std::vector<StepRecord> records_;
};

}  // namespace agentsim
