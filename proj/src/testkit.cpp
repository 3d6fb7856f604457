#include "agentsim/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"

namespace agentsim {

using nlohmann::json;
namespace fs = std::filesystem;

// --- trace metrics -----------------------------------------------------------------

std::function<double(const LogRow&)> channel_fn(const std::string& name) {
  static const std::map<std::string, double LogRow::*> fields = {
      {"t", &LogRow::t},           {"x", &LogRow::x},
      {"y", &LogRow::y},           {"yaw", &LogRow::yaw},
      {"v", &LogRow::v},           {"a", &LogRow::a},
      {"thw", &LogRow::thw},       {"d", &LogRow::d},
      {"kappa_des", &LogRow::kappa_des}, {"a_des", &LogRow::a_des},
      {"v_t_pred", &LogRow::v_t_pred},   {"a_lat", &LogRow::a_lat},
      {"yaw_offset", &LogRow::yaw_offset}, {"s", &LogRow::s}};
  const auto it = fields.find(name);
  if (it == fields.end()) throw ParseError("unknown log channel '" + name + "'");
  const auto member = it->second;
  return [member](const LogRow& row) { return row.*member; };
}

const AgentTrace& trace_of(const RunResult& r, const std::string& agent_id) {
  for (const auto& tr : r.traces)
    if (tr.id == agent_id) return tr;
  throw ParseError("no trace for agent '" + agent_id + "'");
}

double min_value(const AgentTrace& tr, const std::string& channel, double t_from, double t_to) {
  const auto fn = channel_fn(channel);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : tr.rows)
    if (row.t >= t_from && row.t <= t_to) best = std::min(best, fn(row));
  return best;
}

double max_value(const AgentTrace& tr, const std::string& channel, double t_from, double t_to) {
  const auto fn = channel_fn(channel);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& row : tr.rows)
    if (row.t >= t_from && row.t <= t_to) best = std::max(best, fn(row));
  return best;
}

double final_value(const AgentTrace& tr, const std::string& channel) {
  if (tr.rows.empty()) throw ParseError("empty trace for agent '" + tr.id + "'");
  return channel_fn(channel)(tr.rows.back());
}

double settle_value(const AgentTrace& tr, const std::string& channel, double tail_fraction) {
  if (tr.rows.empty()) throw ParseError("empty trace for agent '" + tr.id + "'");
  tail_fraction = std::clamp(tail_fraction, 1e-3, 1.0);
  const std::size_t n = tr.rows.size();
  std::size_t start = n - std::max<std::size_t>(1, static_cast<std::size_t>(n * tail_fraction));
  const auto fn = channel_fn(channel);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = start; i < n; ++i) {
    sum += fn(tr.rows[i]);
    ++count;
  }
  return sum / static_cast<double>(count);
}

double settle_time(const AgentTrace& tr, const std::string& channel, double target, double band,
                   double t_from) {
  const auto fn = channel_fn(channel);
  double settled_at = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (const auto& row : tr.rows) {
    if (row.t < t_from) continue;
    if (std::abs(fn(row) - target) <= band) {
      if (!inside) {
        inside = true;
        settled_at = row.t;
      }
    } else {
      inside = false;
      settled_at = std::numeric_limits<double>::infinity();
    }
  }
  return settled_at;
}

int sign_changes(const AgentTrace& tr, const std::string& channel, double deadband) {
  const auto fn = channel_fn(channel);
  int changes = 0;
  int last_sign = 0;
  for (const auto& row : tr.rows) {
    const double x = fn(row);
    if (std::abs(x) <= deadband) continue;
    const int sign = x > 0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++changes;
    last_sign = sign;
  }
  return changes;
}

std::optional<double> onset_time(const AgentTrace& tr, const std::string& channel,
                                 double threshold, bool below, double sustain_s, double t_from) {
  const auto fn = channel_fn(channel);
  const auto holds = [&](const LogRow& row) {
    return below ? fn(row) < threshold : fn(row) > threshold;
  };
  std::optional<double> start;
  for (const auto& row : tr.rows) {
    if (row.t < t_from) continue;
    if (holds(row)) {
      if (!start) start = row.t;
      if (row.t - *start >= sustain_s) return start;
    } else {
      start.reset();
    }
  }
  return std::nullopt;
}

std::optional<double> event_time(const RunResult& r, const std::string& type,
                                 const std::string& agent, int occurrence) {
  int seen = 0;
  for (const auto& e : r.events) {
    if (e.type != type) continue;
    if (!agent.empty() && e.agent != agent) continue;
    if (++seen == occurrence) return e.t;
  }
  return std::nullopt;
}

int event_count(const RunResult& r, const std::string& type, const std::string& agent) {
  int count = 0;
  for (const auto& e : r.events)
    if (e.type == type && (agent.empty() || e.agent == agent)) ++count;
  return count;
}

// --- criteria ---------------------------------------------------------------------------

Criterion criterion_from_json(const std::string& bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("criterion: malformed JSON");
  Criterion c;
  c.name = j.value("name", "");
  c.kind = j.value("kind", "");
  if (c.name.empty() || c.kind.empty()) throw ParseError("criterion: 'name' and 'kind' required");
  c.agent = j.value("agent", "");
  c.channel = j.value("channel", "");
  c.t_from = j.value("t_from", 0.0);
  c.t_to = j.value("t_to", std::numeric_limits<double>::infinity());
  c.tail_fraction = j.value("tail_fraction", 0.2);
  c.deadband = j.value("deadband", 1e-4);
  c.target = j.value("target", 0.0);
  c.band = j.value("band", 0.0);
  c.event_a = j.value("event_a", "");
  c.event_b = j.value("event_b", "");
  c.occurrence_a = j.value("occurrence_a", 1);
  c.occurrence_b = j.value("occurrence_b", 1);
  if (j.contains("expect")) {
    const json& e = j["expect"];
    if (e.contains("min")) c.expect_min = e["min"].get<double>();
    if (e.contains("max")) c.expect_max = e["max"].get<double>();
    if (e.contains("equals")) {
      const double v = e["equals"].get<double>();
      const double tol = e.value("tol", 1e-9);
      c.expect_min = v - tol;
      c.expect_max = v + tol;
    }
  }
  return c;
}

CriterionResult evaluate(const Criterion& c, const RunResult& r) {
  CriterionResult res;
  res.criterion = c;
  double value = -1.0;
  if (c.kind == "settle_value") {
    value = settle_value(trace_of(r, c.agent), c.channel, c.tail_fraction);
  } else if (c.kind == "min_value") {
    value = min_value(trace_of(r, c.agent), c.channel, c.t_from, c.t_to);
  } else if (c.kind == "max_value") {
    value = max_value(trace_of(r, c.agent), c.channel, c.t_from, c.t_to);
  } else if (c.kind == "final_value") {
    value = final_value(trace_of(r, c.agent), c.channel);
  } else if (c.kind == "settle_time") {
    value = settle_time(trace_of(r, c.agent), c.channel, c.target, c.band, c.t_from);
  } else if (c.kind == "sign_changes") {
    value = sign_changes(trace_of(r, c.agent), c.channel, c.deadband);
  } else if (c.kind == "collision_count") {
    value = event_count(r, "collision");
  } else if (c.kind == "event_count") {
    value = event_count(r, c.event_a, c.agent);
  } else if (c.kind == "event_time") {
    const auto t = event_time(r, c.event_a, c.agent, c.occurrence_a);
    value = t ? *t : -1.0;
  } else if (c.kind == "duration_between_events") {
    const auto ta = event_time(r, c.event_a, c.agent, c.occurrence_a);
    const auto tb = event_time(r, c.event_b, c.agent, c.occurrence_b);
    value = ta && tb ? *tb - *ta : -1.0;
  } else {
    throw ParseError("criterion '" + c.name + "': unknown kind '" + c.kind + "'");
  }
  res.value = value;
  res.pass = value >= c.expect_min && value <= c.expect_max && std::isfinite(value);
  if (std::isinf(c.expect_max) && std::isinf(value) && value > 0 && c.expect_min <= value)
    res.pass = true;  // explicit "never" expectations
  return res;
}

// --- catalog ---------------------------------------------------------------------------

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open catalog file '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("catalog: malformed JSON");
  Catalog cat;
  cat.name = j.value("name", fs::path(path).stem().string());
  if (!j.contains("runs") || !j["runs"].is_array() || j["runs"].empty())
    throw ParseError("catalog '" + cat.name + "': needs a non-empty 'runs' array");
  const fs::path base = fs::path(path).parent_path();
  for (const auto& jr : j["runs"]) {
    CatalogRun run;
    run.name = jr.value("name", "");
    if (run.name.empty()) throw ParseError("catalog '" + cat.name + "': run without a name");
    if (!jr.contains("scenario"))
      throw ParseError("catalog run '" + run.name + "': missing 'scenario'");
    fs::path sp = fs::path(jr["scenario"].get<std::string>());
    if (sp.is_relative()) sp = base / sp;
    run.scenario_path = sp.string();
    if (jr.contains("criteria")) {
      for (const auto& jc : jr["criteria"]) run.criteria.push_back(criterion_from_json(jc.dump()));
    }
    cat.runs.push_back(std::move(run));
  }
  return cat;
}

CatalogReport run_catalog(const Catalog& cat, const RunOptions& opts) {
  CatalogReport rep;
  rep.name = cat.name;
  rep.all_pass = true;
  for (const auto& run : cat.runs) {
    CatalogRunReport rr;
    rr.name = run.name;
    rr.scenario = run.scenario_path;
    const Scenario sc = load_scenario(run.scenario_path);
    const RunResult result = run_scenario(sc, opts);
    rr.wall_s = result.wall_s;
    rr.pass = true;
    for (const auto& c : run.criteria) {
      rr.results.push_back(evaluate(c, result));
      rr.pass = rr.pass && rr.results.back().pass;
    }
    rep.all_pass = rep.all_pass && rr.pass;
    rep.runs.push_back(std::move(rr));
  }
  return rep;
}

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string catalog_report_to_json(const CatalogReport& rep) {
  json j;
  j["type"] = "CatalogReport";
  j["name"] = rep.name;
  j["all_pass"] = rep.all_pass;
  j["runs"] = json::array();
  for (const auto& run : rep.runs) {
    json jr;
    jr["name"] = run.name;
    jr["scenario"] = run.scenario;
    jr["pass"] = run.pass;
    jr["wall_s"] = run.wall_s;
    jr["criteria"] = json::array();
    for (const auto& res : run.results) {
      json jc;
      jc["name"] = res.criterion.name;
      jc["kind"] = res.criterion.kind;
      jc["value"] = finite_or_null(res.value);
      jc["min"] = finite_or_null(res.criterion.expect_min);
      jc["max"] = finite_or_null(res.criterion.expect_max);
      jc["pass"] = res.pass;
      jr["criteria"].push_back(jc);
    }
    j["runs"].push_back(jr);
  }
  return j.dump(2);
}

std::string run_report_json(const Scenario& sc, const RunResult& r) {
  json j;
  j["type"] = "RunReport";
  j["scenario"] = sc.name;
  j["map"] = sc.map_path;
  j["dt"] = sc.dt;
  j["steps"] = r.steps;
  j["sim_s"] = r.sim_s;
  j["wall_s"] = r.wall_s;
  j["rtf"] = r.rtf;
  j["collision"] = r.collision;
  std::map<std::string, int> by_type;
  for (const auto& e : r.events) by_type[e.type] += 1;
  j["events"] = json::object();
  for (const auto& [k, v] : by_type) j["events"][k] = v;
  j["agents"] = json::array();
  for (const auto& tr : r.traces) {
    json ja;
    ja["id"] = tr.id;
    ja["rows"] = tr.rows.size();
    if (!tr.rows.empty()) {
      const LogRow& last = tr.rows.back();
      ja["final"] = {{"t", last.t}, {"v", last.v}, {"s", last.s}, {"lane", last.lane}};
      ja["min_thw"] = finite_or_null(min_value(tr, "thw"));
      ja["max_abs_a"] = std::max(std::abs(min_value(tr, "a")), std::abs(max_value(tr, "a")));
      ja["max_abs_a_lat"] =
          std::max(std::abs(min_value(tr, "a_lat")), std::abs(max_value(tr, "a_lat")));
    }
    j["agents"].push_back(ja);
  }
  return j.dump(2);
}

// --- benchmark ---------------------------------------------------------------------------

double process_rss_mb() {
  std::ifstream statm("/proc/self/statm");
  long total = 0, resident = 0;
  if (!(statm >> total >> resident)) return 0.0;
  return static_cast<double>(resident) * static_cast<double>(sysconf(_SC_PAGESIZE)) / 1048576.0;
}

Scenario make_bench_scenario(std::size_t n_agents, double duration) {
  Scenario sc;
  sc.name = "bench_" + std::to_string(n_agents);
  sc.map_path = "<generated straight 3000 m>";
  MapModel map;
  map.version = "bench-straight-3000";
  Lane lane;
  lane.id = "road";
  lane.centerline = Polyline({{0.0, 0.0}, {3000.0, 0.0}});
  lane.width = 3.5;
  map.lanes.emplace(lane.id, lane);
  sc.map = std::move(map);
  sc.duration = duration;
  sc.dt = 0.01;
  const double spacing = 30.0;
  for (std::size_t i = 0; i < n_agents; ++i) {
    AgentSpec spec;
    spec.id = "agent" + std::to_string(i);
    spec.lane_id = "road";
    // agent0 is the platoon leader, furthest along the lane
    spec.s = spacing * static_cast<double>(n_agents - 1 - i);
    spec.v0 = 10.0;
    sc.agents.push_back(std::move(spec));
  }
  return sc;
}

BenchReport bench_scalability(const std::vector<std::size_t>& counts, double duration,
                              int replicates, bool parallel) {
  BenchReport rep;
  rep.sim_s = duration;
  rep.replicates = replicates;
  RunOptions opts;
  opts.parallel = parallel;
  opts.log_every = 10;
  for (const std::size_t n : counts) {
    const Scenario sc = make_bench_scenario(n, duration);
    std::vector<double> walls;
    for (int rep_i = 0; rep_i < replicates; ++rep_i)
      walls.push_back(run_scenario(sc, opts).wall_s);
    std::sort(walls.begin(), walls.end());
    const double wall = walls[walls.size() / 2];
    BenchPoint pt;
    pt.agents = n;
    pt.wall_s = wall;
    pt.rtf = wall > 0.0 ? duration / wall : 0.0;
    pt.rss_mb = process_rss_mb();
    rep.points.push_back(pt);
  }
  // Least-squares fit of wall(n).
  const std::size_t m = rep.points.size();
  if (m >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& pt : rep.points) {
      const double x = static_cast<double>(pt.agents);
      sx += x;
      sy += pt.wall_s;
      sxx += x * x;
      sxy += x * pt.wall_s;
    }
    const double dm = static_cast<double>(m);
    const double denom = dm * sxx - sx * sx;
    rep.slope = denom != 0.0 ? (dm * sxy - sx * sy) / denom : 0.0;
    rep.intercept = (sy - rep.slope * sx) / dm;
    double ss_res = 0, ss_tot = 0;
    const double mean = sy / dm;
    for (const auto& pt : rep.points) {
      const double fit = rep.slope * static_cast<double>(pt.agents) + rep.intercept;
      ss_res += (pt.wall_s - fit) * (pt.wall_s - fit);
      ss_tot += (pt.wall_s - mean) * (pt.wall_s - mean);
    }
    rep.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return rep;
}

std::string bench_report_to_json(const BenchReport& rep) {
  json j;
  j["type"] = "BenchReport";
  j["sim_s"] = rep.sim_s;
  j["replicates"] = rep.replicates;
  j["slope_s_per_agent"] = rep.slope;
  j["intercept_s"] = rep.intercept;
  j["r2"] = rep.r2;
  j["points"] = json::array();
  for (const auto& pt : rep.points) {
    j["points"].push_back(
        {{"agents", pt.agents}, {"wall_s", pt.wall_s}, {"rtf", pt.rtf}, {"rss_mb", pt.rss_mb}});
  }
  return j.dump(2);
}

std::string bench_report_to_csv(const BenchReport& rep) {
  std::string out = "agents,wall_s,rtf,rss_mb\n";
  char buf[128];
  for (const auto& pt : rep.points) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.3f,%.2f\n", pt.agents, pt.wall_s, pt.rtf,
                  pt.rss_mb);
    out += buf;
  }
  return out;
}

}  // namespace agentsim
