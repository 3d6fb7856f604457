#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agentsim/host.hpp"
#include "agentsim/lane_map.hpp"
#include "agentsim/messages.hpp"

namespace agentsim {

/// One agent's scenario definition.
struct AgentSpec {
  std::string id;
  // Either a lane seat (lane_id + s) or an explicit pose.
  std::string lane_id;
  double s = 0.0;
  bool has_pose = false;
  Pose2 pose;
  double v0 = 0.0;
  double length = 4.2;
  double width = 1.8;
  std::map<std::string, double> parameters;  // dotted overrides, see parameter_bindings()
  struct TimedCommand {
    double t = 0.0;
    TrafficCommand cmd;
  };
  std::vector<TimedCommand> commands;
};

struct Scenario {
  std::string name;
  std::string map_path;  // as resolved at load time
  MapModel map;
  double duration = 10.0;
  double dt = 0.01;
  std::vector<AgentSpec> agents;
};

Scenario scenario_from_json(const std::string& bytes, const std::string& base_dir);
Scenario load_scenario(const std::string& path);

enum class StepOrder { forward, reverse, shuffled };

struct RunOptions {
  StepOrder order = StepOrder::forward;
  std::uint64_t shuffle_seed = 1;
  bool parallel = false;
  double sensor_range = 150.0;  // m, view truncation radius
  bool record_io = false;       // capture per-step boundary messages per agent
  unsigned log_every = 1;       // keep every n-th log row
};

/// One per-agent log row, sampled at t = k * dt (row 0 is the initial state).
struct LogRow {
  double t = 0.0;
  double x = 0.0, y = 0.0, yaw = 0.0;
  double v = 0.0, a = 0.0;
  double thw = 0.0;         // time headway to the lead; +inf when free driving
  double d = 0.0;           // signed lateral offset from the seat-lane center
  double kappa_des = 0.0;
  double a_des = 0.0;
  double v_t_pred = 0.0;
  double a_lat = 0.0;       // v^2 * actual path curvature
  double yaw_offset = 0.0;  // heading error against the seat lane
  double s = 0.0;
  std::string lane;

  bool operator==(const LogRow&) const = default;
};

struct AgentTrace {
  std::string id;
  std::vector<LogRow> rows;

  bool operator==(const AgentTrace&) const = default;
};

struct Event {
  double t = 0.0;
  std::string type;  // collision, lane_change_start, lane_change_end,
                     // goal_reached, signal_passed, command_rejected
  std::string agent;
  std::string other;
  std::string detail;

  bool operator==(const Event&) const = default;
};

struct RunResult {
  std::vector<AgentTrace> traces;
  std::vector<Event> events;
  std::vector<std::vector<StepRecord>> io_records;  // per agent when record_io
  std::size_t steps = 0;
  double sim_s = 0.0;
  double wall_s = 0.0;
  double rtf = 0.0;  // sim_s / wall_s
  bool collision = false;
};

RunResult run_scenario(const Scenario& sc, const RunOptions& opts = {});

/// Closed-overlap test for oriented rectangles (touching counts as overlap).
bool rectangles_overlap(const Pose2& pa, double la, double wa, const Pose2& pb, double lb,
                        double wb);

/// Equality of everything except wall-clock derived fields.
bool logs_identical(const RunResult& a, const RunResult& b);

void write_csv_logs(const RunResult& r, const std::string& out_dir);
void write_events_json(const RunResult& r, const std::string& path);

}  // namespace agentsim
