#include "agentsim/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"

namespace agentsim {

using nlohmann::json;
namespace fs = std::filesystem;

// --- scenario loading ------------------------------------------------------------------

namespace {

TrafficAction action_from_json(const json& j, const std::string& ctx) {
  TrafficAction a;
  const std::string type = j.value("type", "");
  if (type == "speed") {
    a.type = TrafficAction::Type::speed;
    if (!j.contains("v") || !j["v"].is_number())
      throw ParseError(ctx + ": speed action needs a numeric 'v'");
    a.v = j["v"].get<double>();
  } else if (type == "acquire_position") {
    a.type = TrafficAction::Type::acquire_position;
    if (!j.contains("x") || !j.contains("y"))
      throw ParseError(ctx + ": acquire_position action needs 'x' and 'y'");
    a.x = j["x"].get<double>();
    a.y = j["y"].get<double>();
  } else {
    throw ParseError(ctx + ": unknown action type '" + type + "'");
  }
  return a;
}

}  // namespace

Scenario scenario_from_json(const std::string& bytes, const std::string& base_dir) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("scenario: malformed JSON");
  Scenario sc;
  sc.name = j.value("name", "scenario");
  if (!j.contains("map") || !j["map"].is_string())
    throw ParseError("scenario '" + sc.name + "': missing 'map' path");
  fs::path map_path = fs::path(j["map"].get<std::string>());
  if (map_path.is_relative() && !base_dir.empty()) map_path = fs::path(base_dir) / map_path;
  sc.map_path = map_path.string();
  sc.map = load_map(sc.map_path);
  sc.duration = j.value("duration", 10.0);
  sc.dt = j.value("dt", 0.01);
  if (!(sc.dt > 0.0) || !std::isfinite(sc.dt))
    throw ParseError("scenario '" + sc.name + "': dt must be positive");
  if (sc.duration < 0.0 || !std::isfinite(sc.duration))
    throw ParseError("scenario '" + sc.name + "': duration must be non-negative");

  if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
    throw ParseError("scenario '" + sc.name + "': needs a non-empty 'agents' array");
  std::set<std::string> ids;
  for (const auto& ja : j["agents"]) {
    AgentSpec spec;
    spec.id = ja.value("id", "");
    const std::string ctx = "scenario '" + sc.name + "', agent '" + spec.id + "'";
    if (spec.id.empty()) throw ParseError(ctx + ": missing id");
    if (!ids.insert(spec.id).second) throw ParseError(ctx + ": duplicate id");
    if (!ja.contains("start") || !ja["start"].is_object())
      throw ParseError(ctx + ": missing 'start'");
    const json& st = ja["start"];
    spec.v0 = st.value("v", 0.0);
    if (st.contains("lane")) {
      spec.lane_id = st["lane"].get<std::string>();
      spec.s = st.value("s", 0.0);
      if (!sc.map.has_lane(spec.lane_id))
        throw ParseError(ctx + ": start lane '" + spec.lane_id + "' not in map");
      const double len = sc.map.lane(spec.lane_id).length();
      if (spec.s < 0.0 || spec.s > len)
        throw ParseError(ctx + ": start s outside [0, " + std::to_string(len) + "]");
    } else if (st.contains("x") && st.contains("y")) {
      spec.has_pose = true;
      spec.pose.x = st["x"].get<double>();
      spec.pose.y = st["y"].get<double>();
      spec.pose.yaw = st.value("yaw", 0.0);
    } else {
      throw ParseError(ctx + ": start needs either 'lane' or 'x'/'y'");
    }
    spec.length = ja.value("length", 4.2);
    spec.width = ja.value("width", 1.8);
    if (ja.contains("parameters")) {
      const auto& table = parameter_bindings();
      for (const auto& [k, v] : ja["parameters"].items()) {
        if (!v.is_number()) throw ParseError(ctx + ": parameter '" + k + "' must be numeric");
        const auto it =
            std::find_if(table.begin(), table.end(),
                         [&k = k](const ParameterBinding& b) { return b.spec.name == k; });
        if (it == table.end()) throw ParseError(ctx + ": unknown parameter '" + k + "'");
        const double val = v.get<double>();
        if (val < it->spec.min || val > it->spec.max)
          throw ParseError(ctx + ": parameter '" + k + "' = " + std::to_string(val) +
                           " outside [" + std::to_string(it->spec.min) + ", " +
                           std::to_string(it->spec.max) + "]");
        spec.parameters[k] = val;
      }
    }
    if (ja.contains("commands")) {
      for (const auto& jc : ja["commands"]) {
        AgentSpec::TimedCommand tc;
        tc.t = jc.value("t", 0.0);
        tc.cmd.timestamp = tc.t;
        tc.cmd.agent_id = spec.id;
        if (!jc.contains("actions") || !jc["actions"].is_array())
          throw ParseError(ctx + ": command needs an 'actions' array");
        for (const auto& jact : jc["actions"]) tc.cmd.actions.push_back(action_from_json(jact, ctx));
        spec.commands.push_back(std::move(tc));
      }
      std::stable_sort(spec.commands.begin(), spec.commands.end(),
                       [](const auto& a, const auto& b) { return a.t < b.t; });
    }
    sc.agents.push_back(std::move(spec));
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Scenario sc = scenario_from_json(bytes, fs::path(path).parent_path().string());
  if (sc.name == "scenario") sc.name = fs::path(path).stem().string();
  return sc;
}

// --- collision test ---------------------------------------------------------------------

namespace {

void rect_corners(const Pose2& p, double length, double width, Vec2 out[4]) {
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const double hl = 0.5 * length, hw = 0.5 * width;
  const Vec2 ex{c * hl, s * hl};
  const Vec2 ey{-s * hw, c * hw};
  out[0] = {p.x + ex.x + ey.x, p.y + ex.y + ey.y};
  out[1] = {p.x + ex.x - ey.x, p.y + ex.y - ey.y};
  out[2] = {p.x - ex.x - ey.x, p.y - ex.y - ey.y};
  out[3] = {p.x - ex.x + ey.x, p.y - ex.y + ey.y};
}

bool separated_on_axis(const Vec2& axis, const Vec2* a, const Vec2* b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (int i = 0; i < 4; ++i) {
    const double pa = a[i].x * axis.x + a[i].y * axis.y;
    const double pb = b[i].x * axis.x + b[i].y * axis.y;
    amin = std::min(amin, pa);
    amax = std::max(amax, pa);
    bmin = std::min(bmin, pb);
    bmax = std::max(bmax, pb);
  }
  return amax < bmin || bmax < amin;  // strict: touching projections still overlap
}

}  // namespace

bool rectangles_overlap(const Pose2& pa, double la, double wa, const Pose2& pb, double lb,
                        double wb) {
  Vec2 ca[4], cb[4];
  rect_corners(pa, la, wa, ca);
  rect_corners(pb, lb, wb, cb);
  const Vec2 axes[4] = {{std::cos(pa.yaw), std::sin(pa.yaw)},
                        {-std::sin(pa.yaw), std::cos(pa.yaw)},
                        {std::cos(pb.yaw), std::sin(pb.yaw)},
                        {-std::sin(pb.yaw), std::cos(pb.yaw)}};
  for (const auto& axis : axes)
    if (separated_on_axis(axis, ca, cb)) return false;
  return true;
}

// --- run loop ----------------------------------------------------------------------------

namespace {

struct SeatResult {
  std::string lane;
  double s = 0.0;
  double d = 0.0;
};

/// Continuity-aware seating: try to stay on the previous lane or move to one of
/// its direct continuations; fall back to a global projection.
SeatResult reseat(const MapModel& map, const std::string& prev_lane, double prev_s,
                  const Vec2& pos, double d_max) {
  std::vector<std::string> candidates;
  if (!prev_lane.empty() && map.has_lane(prev_lane)) {
    candidates.push_back(prev_lane);
    const Lane& prev = map.lane(prev_lane);
    for (const auto& suc : prev.successors) candidates.push_back(suc);
    if (prev.left_neighbor) candidates.push_back(*prev.left_neighbor);
    if (prev.right_neighbor) candidates.push_back(*prev.right_neighbor);
  }
  SeatResult best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& id : candidates) {
    if (!map.has_lane(id)) continue;
    const Lane& lane = map.lane(id);
    const PolylineProjection proj = lane.centerline.project(pos);
    if (std::abs(proj.d) > 0.75 * lane.width) continue;
    const double score = std::abs(proj.d) - (id == prev_lane ? 1e-6 : 0.0);
    if (score < best_score) {
      best_score = score;
      best = {id, proj.s, proj.d};
    }
  }
  if (std::isfinite(best_score)) return best;
  try {
    const LaneProjection proj = project(map, pos, d_max);
    return {proj.lane_id, proj.s, proj.d};
  } catch (const OffRoadError&) {
    // Keep the previous seat; clamp s to the lane end.
    SeatResult keep;
    keep.lane = prev_lane;
    if (!prev_lane.empty() && map.has_lane(prev_lane))
      keep.s = std::min(prev_s, map.lane(prev_lane).length());
    else
      keep.s = prev_s;
    keep.d = 0.0;
    return keep;
  }
}

struct SimAgent {
  AgentSpec spec;
  AgentComponent comp;
  MovingObjectState state;
  double seat_d = 0.0;
  double yaw_offset = 0.0;
  std::size_t next_cmd = 0;
  bool goal_emitted = false;
};

LogRow make_row(double t, const SimAgent& ag, double wheelbase) {
  LogRow row;
  row.t = t;
  row.x = ag.state.pose.x;
  row.y = ag.state.pose.y;
  row.yaw = ag.state.pose.yaw;
  row.v = ag.state.v;
  row.a = ag.state.a;
  const StabilizationOutput& st = ag.comp.stabilization();
  row.thw = st.thw;
  row.d = ag.seat_d;
  row.kappa_des = st.kappa_des;
  row.a_des = st.a_des;
  row.v_t_pred = st.v_T_pred;
  const double kappa_act = std::tan(ag.comp.vehicle().steer) / wheelbase;
  row.a_lat = ag.state.v * ag.state.v * kappa_act;
  row.yaw_offset = ag.yaw_offset;
  row.s = ag.state.s;
  row.lane = ag.state.lane_id;
  return row;
}

}  // namespace

RunResult run_scenario(const Scenario& sc, const RunOptions& opts) {
  RunResult result;
  const std::size_t n = sc.agents.size();
  std::vector<SimAgent> agents(n);

  // Signal anchor positions, for view range filtering is deliberately skipped
  // (signals are static map knowledge); objects are range-filtered.
  for (std::size_t i = 0; i < n; ++i) {
    SimAgent& ag = agents[i];
    ag.spec = sc.agents[i];
    MovingObjectState init;
    init.id = ag.spec.id;
    init.v = ag.spec.v0;
    init.length = ag.spec.length;
    init.width = ag.spec.width;
    if (!ag.spec.lane_id.empty()) {
      const Lane& lane = sc.map.lane(ag.spec.lane_id);
      const Vec2 p = lane.centerline.point_at(ag.spec.s);
      init.pose = {p.x, p.y, lane.centerline.heading_at(ag.spec.s)};
      init.lane_id = ag.spec.lane_id;
      init.s = ag.spec.s;
      ag.seat_d = 0.0;
    } else {
      init.pose = ag.spec.pose;
      const LaneProjection proj = project(sc.map, {init.pose.x, init.pose.y});
      init.lane_id = proj.lane_id;
      init.s = proj.s;
      ag.seat_d = proj.d;
    }
    ag.yaw_offset =
        normalize_angle(init.pose.yaw - sc.map.lane(init.lane_id).centerline.heading_at(init.s));
    ag.state = init;
    for (const auto& [k, v] : ag.spec.parameters) ag.comp.set_parameter(k, v);
    ag.comp.init(&sc.map, init, 0.0);
    ag.comp.set_recording(opts.record_io);
  }

  const std::size_t steps = static_cast<std::size_t>(std::llround(sc.duration / sc.dt));
  result.steps = steps;
  result.sim_s = static_cast<double>(steps) * sc.dt;
  result.traces.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.traces[i].id = agents[i].spec.id;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (opts.order == StepOrder::reverse) {
    std::reverse(order.begin(), order.end());
  } else if (opts.order == StepOrder::shuffled) {
    std::mt19937_64 rng(opts.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::set<std::pair<std::size_t, std::size_t>> contacts;
  const unsigned log_every = std::max(1u, opts.log_every);
  const auto t_start = std::chrono::steady_clock::now();

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;

    // Log rows at t = k * dt; row 0 is the initial state.
    if (k % log_every == 0 || k == steps) {
      for (std::size_t i = 0; i < n; ++i)
        result.traces[i].rows.push_back(
            make_row(t, agents[i], agents[i].comp.parameters().dynamics.wheelbase));
    }
    if (k == steps) break;

    // Published snapshot: all states at time t.
    std::vector<MovingObjectState> snapshot(n);
    for (std::size_t i = 0; i < n; ++i) snapshot[i] = agents[i].state;

    // Scenario commands due at this step are dispatched before stepping.
    for (std::size_t i = 0; i < n; ++i) {
      SimAgent& ag = agents[i];
      while (ag.next_cmd < ag.spec.commands.size() &&
             ag.spec.commands[ag.next_cmd].t <= t + 1e-9) {
        ag.comp.set_command(ag.spec.commands[ag.next_cmd].cmd);
        ag.next_cmd += 1;
      }
    }

    // Per-agent views against the frozen snapshot.
    for (std::size_t i = 0; i < n; ++i) {
      SensorView view;
      view.timestamp = t;
      view.ego_id = agents[i].spec.id;
      view.lanes_ref = sc.map.version;
      const Vec2 ego_pos{snapshot[i].pose.x, snapshot[i].pose.y};
      for (std::size_t jx = 0; jx < n; ++jx) {
        const Vec2 dp{snapshot[jx].pose.x - ego_pos.x, snapshot[jx].pose.y - ego_pos.y};
        if (jx == i || dp.x * dp.x + dp.y * dp.y <= opts.sensor_range * opts.sensor_range)
          view.objects.push_back(snapshot[jx]);
      }
      for (const auto& sig : sc.map.signals) view.signals.push_back(sig);
      agents[i].comp.set_view(view);
    }

    // Step all agents; the permutation (or thread assignment) must not change
    // any result since each component only reads the snapshot.
    if (!opts.parallel || n < 2) {
      for (const std::size_t idx : order) agents[idx].comp.do_step(t, sc.dt);
    } else {
      const std::size_t n_threads = std::min<std::size_t>(std::thread::hardware_concurrency(), n);
      std::vector<std::thread> pool;
      std::exception_ptr error;
      std::mutex error_mu;
      for (std::size_t w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
          try {
            for (std::size_t oi = w; oi < n; oi += n_threads) agents[order[oi]].comp.do_step(t, sc.dt);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      if (error) std::rethrow_exception(error);
    }

    // Collect results, re-seat authoritatively, raise events.
    for (std::size_t i = 0; i < n; ++i) {
      SimAgent& ag = agents[i];
      const MovingObjectState prev = ag.state;
      ag.state = ag.comp.update().state;
      const SeatResult seat = reseat(sc.map, prev.lane_id, prev.s,
                                     {ag.state.pose.x, ag.state.pose.y},
                                     ag.comp.parameters().adapter.d_max);
      ag.state.lane_id = seat.lane;
      ag.state.s = seat.s;
      ag.seat_d = seat.d;
      ag.yaw_offset = seat.lane.empty()
                          ? 0.0
                          : normalize_angle(ag.state.pose.yaw -
                                            sc.map.lane(seat.lane).centerline.heading_at(seat.s));

      const AdapterEvents& ev = ag.comp.adapter().events();
      if (ev.lane_change_started)
        result.events.push_back({t, "lane_change_start", ag.spec.id, "", ag.state.lane_id});
      if (ev.lane_change_completed)
        result.events.push_back({t, "lane_change_end", ag.spec.id, "", ag.state.lane_id});
      if (ev.command_rejected)
        result.events.push_back({t, "command_rejected", ag.spec.id, "",
                                 ag.comp.adapter().diagnostics().empty()
                                     ? ""
                                     : ag.comp.adapter().diagnostics().back()});
      ag.comp.adapter().clear_events();

      if (!ag.goal_emitted && ag.comp.adapter().has_goal() &&
          ag.comp.adapter().remaining_route_m() <=
              ag.comp.parameters().adapter.goal_tolerance) {
        result.events.push_back({t + sc.dt, "goal_reached", ag.spec.id, "", ""});
        ag.goal_emitted = true;
      }

      // Signals passed between the previous and the new seat.
      for (const auto& sig : sc.map.signals) {
        bool passed = false;
        if (sig.lane_id == prev.lane_id && sig.lane_id == ag.state.lane_id)
          passed = prev.s < sig.s + 1e-12 && sig.s < ag.state.s + 1e-12 && prev.s < ag.state.s;
        else if (sig.lane_id == prev.lane_id && prev.lane_id != ag.state.lane_id)
          passed = sig.s >= prev.s;
        else if (sig.lane_id == ag.state.lane_id && prev.lane_id != ag.state.lane_id)
          passed = sig.s <= ag.state.s;
        if (passed) {
          const char* kind =
              sig.kind == SignalObservation::Kind::speed_limit ? "speed_limit" : "stop_line";
          result.events.push_back(
              {t + sc.dt, "signal_passed", ag.spec.id, sig.lane_id, kind});
        }
      }
    }

    // Pairwise collision check on the new states.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t jx = i + 1; jx < n; ++jx) {
        const MovingObjectState& a = agents[i].state;
        const MovingObjectState& b = agents[jx].state;
        const double dx = a.pose.x - b.pose.x, dy = a.pose.y - b.pose.y;
        const double ra = 0.5 * std::hypot(a.length, a.width);
        const double rb = 0.5 * std::hypot(b.length, b.width);
        if (dx * dx + dy * dy > (ra + rb) * (ra + rb)) {
          contacts.erase({i, jx});
          continue;
        }
        if (rectangles_overlap(a.pose, a.length, a.width, b.pose, b.length, b.width)) {
          if (contacts.insert({i, jx}).second) {
            result.events.push_back(
                {t + sc.dt, "collision", agents[i].spec.id, agents[jx].spec.id, ""});
            result.collision = true;
          }
        } else {
          contacts.erase({i, jx});
        }
      }
    }
  }

  const auto t_end = std::chrono::steady_clock::now();
  result.wall_s = std::chrono::duration<double>(t_end - t_start).count();
  result.rtf = result.wall_s > 0.0 ? result.sim_s / result.wall_s : 0.0;
  if (opts.record_io) {
    result.io_records.reserve(n);
    for (auto& ag : agents) result.io_records.push_back(ag.comp.records());
  }
  return result;
}

bool logs_identical(const RunResult& a, const RunResult& b) {
  return a.traces == b.traces && a.events == b.events && a.steps == b.steps &&
         a.collision == b.collision;
}

// --- writers ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void write_csv_logs(const RunResult& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& trace : r.traces) {
    std::ofstream out(fs::path(out_dir) / (trace.id + ".csv"));
    if (!out) throw Error("cannot write log for agent '" + trace.id + "' in " + out_dir);
    out << "t,x,y,yaw,v,a,thw,d,kappa_des,a_des,v_t_pred,a_lat,yaw_offset,s,lane\n";
    for (const auto& row : trace.rows) {
      out << fmt(row.t) << ',' << fmt(row.x) << ',' << fmt(row.y) << ',' << fmt(row.yaw) << ','
          << fmt(row.v) << ',' << fmt(row.a) << ',' << fmt(row.thw) << ',' << fmt(row.d) << ','
          << fmt(row.kappa_des) << ',' << fmt(row.a_des) << ',' << fmt(row.v_t_pred) << ','
          << fmt(row.a_lat) << ',' << fmt(row.yaw_offset) << ',' << fmt(row.s) << ',' << row.lane
          << '\n';
    }
  }
}

void write_events_json(const RunResult& r, const std::string& path) {
  json j;
  j["type"] = "EventLog";
  j["events"] = json::array();
  for (const auto& e : r.events) {
    j["events"].push_back(
        {{"t", e.t}, {"type", e.type}, {"agent", e.agent}, {"other", e.other}, {"detail", e.detail}});
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write events file '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace agentsim
