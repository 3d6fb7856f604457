// Python bindings for the simulation core. Exposes map loading/generation,
// routing, scenario runs, criteria evaluation and the scalability benchmark.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

#include "agentsim/behavior.hpp"
#include "agentsim/errors.hpp"
#include "agentsim/lane_map.hpp"
#include "agentsim/simulation.hpp"
#include "agentsim/testkit.hpp"

namespace py = pybind11;
using namespace agentsim;

namespace {

py::dict run_result_to_dict(const RunResult& r) {
  py::dict out;
  out["steps"] = r.steps;
  out["sim_s"] = r.sim_s;
  out["wall_s"] = r.wall_s;
  out["rtf"] = r.rtf;
  out["collision"] = r.collision;
  py::list events;
  for (const auto& e : r.events) {
    py::dict ev;
    ev["t"] = e.t;
    ev["type"] = e.type;
    ev["agent"] = e.agent;
    if (!e.other.empty()) ev["other"] = e.other;
    if (!e.detail.empty()) ev["detail"] = e.detail;
    events.append(ev);
  }
  out["events"] = events;
  py::dict traces;
  for (const auto& tr : r.traces) {
    py::dict t;
    std::vector<double> ts, xs, ys, vs, as, thws, ds, kappas, ss;
    ts.reserve(tr.rows.size());
    for (const auto& row : tr.rows) {
      ts.push_back(row.t);
      xs.push_back(row.x);
      ys.push_back(row.y);
      vs.push_back(row.v);
      as.push_back(row.a);
      thws.push_back(row.thw);
      ds.push_back(row.d);
      kappas.push_back(row.kappa_des);
      ss.push_back(row.s);
    }
    t["t"] = ts;
    t["x"] = xs;
    t["y"] = ys;
    t["v"] = vs;
    t["a"] = as;
    t["thw"] = thws;
    t["d"] = ds;
    t["kappa_des"] = kappas;
    t["s"] = ss;
    traces[py::str(tr.id)] = t;
  }
  out["traces"] = traces;
  return out;
}

RunOptions options_from_kwargs(const std::string& order, std::uint64_t seed, bool parallel,
                               std::size_t log_every, double sensor_range) {
  RunOptions o;
  if (order == "forward")
    o.order = StepOrder::forward;
  else if (order == "reverse")
    o.order = StepOrder::reverse;
  else if (order == "shuffled")
    o.order = StepOrder::shuffled;
  else
    throw ParseError("unknown step order: " + order);
  o.shuffle_seed = seed;
  o.parallel = parallel;
  o.log_every = log_every;
  o.sensor_range = sensor_range;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Closed-loop traffic agent simulation core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception<NoRouteError>(m, "NoRouteError", PyExc_RuntimeError);
  py::register_exception<OffRoadError>(m, "OffRoadError", PyExc_RuntimeError);
  py::register_exception<HostError>(m, "HostError", PyExc_RuntimeError);

  m.def(
      "load_map_json",
      [](const std::string& path) { return map_to_json(load_map(path)); },
      py::arg("path"),
      "Load and validate a lane map file; returns its canonical JSON text.");

  m.def(
      "generate_test_road",
      [](double radius, double spiral, double line) {
        return map_to_json(generate_test_road(radius, spiral, line));
      },
      py::arg("radius") = 100.0, py::arg("spiral") = 60.0, py::arg("line") = 150.0,
      "Line-spiral-arc test road as canonical map JSON.");

  m.def(
      "generate_intersection",
      [](double arm, double turn_radius) {
        return map_to_json(generate_intersection(arm, turn_radius));
      },
      py::arg("arm") = 150.0, py::arg("turn_radius") = 12.0,
      "Four-arm right-turn intersection as canonical map JSON.");

  m.def(
      "shortest_route",
      [](const std::string& map_path, const std::string& from_lane, double from_s,
         const std::string& to_lane, double to_s, double penalty) {
        const MapModel map = load_map(map_path);
        const Route r = shortest_route(map, from_lane, from_s, to_lane, to_s, penalty);
        py::dict out;
        py::list steps;
        for (const auto& st : r.steps) {
          py::dict d;
          d["lane"] = st.lane_id;
          d["via_lane_change"] = st.via_lane_change;
          steps.append(d);
        }
        out["steps"] = steps;
        out["cost"] = r.cost;
        out["lane_changes"] = r.lane_changes;
        return out;
      },
      py::arg("map_path"), py::arg("from_lane"), py::arg("from_s"), py::arg("to_lane"),
      py::arg("to_s"), py::arg("penalty") = 5.0,
      "Route between two lane positions over successor/neighbor edges.");

  m.def(
      "run_scenario",
      [](const std::string& path, const std::string& order, std::uint64_t seed, bool parallel,
         std::size_t log_every, double sensor_range) {
        const Scenario sc = load_scenario(path);
        const RunResult r = run_scenario(
            sc, options_from_kwargs(order, seed, parallel, log_every, sensor_range));
        return run_result_to_dict(r);
      },
      py::arg("path"), py::arg("order") = "forward", py::arg("seed") = 1,
      py::arg("parallel") = false, py::arg("log_every") = 1, py::arg("sensor_range") = 150.0,
      "Run a scenario file; returns traces, events and timing as a dict.");

  m.def(
      "run_catalog",
      [](const std::string& path) {
        const Catalog catalog = load_catalog(path);
        py::list out;
        for (const auto& run : catalog.runs) {
          const Scenario sc = load_scenario(run.scenario_path);
          const RunResult r = run_scenario(sc);
          py::dict d;
          d["name"] = run.name;
          py::list checks;
          bool all = true;
          for (const auto& crit : run.criteria) {
            const CriterionResult res = evaluate(crit, r);
            py::dict c;
            c["name"] = crit.name;
            c["value"] = res.value;
            c["passed"] = res.pass;
            all = all && res.pass;
            checks.append(c);
          }
          d["checks"] = checks;
          d["passed"] = all;
          out.append(d);
        }
        return out;
      },
      py::arg("path"), "Run every catalog entry and evaluate its criteria.");

  m.def(
      "bench",
      [](const std::vector<std::size_t>& counts, double duration, int replicates) {
        return bench_report_to_json(bench_scalability(counts, duration, replicates));
      },
      py::arg("counts"), py::arg("duration") = 20.0, py::arg("replicates") = 3,
      "Scalability sweep; returns the report as JSON text.");

  m.def(
      "equilibrium_headway",
      [](double v_pre, double v_desired, double T, double delta) {
        // Settled state behind a constant-speed lead: the free and follow
        // reactions balance, which pins the headway to T / sqrt(free slack).
        const double slack = 1.0 - std::pow(v_pre / v_desired, delta);
        if (slack <= 0.0) return std::numeric_limits<double>::infinity();
        return T / std::sqrt(slack);
      },
      py::arg("v_pre"), py::arg("v_desired") = 13.88, py::arg("T") = 2.0,
      py::arg("delta") = 4.0,
      "Closed-form settled time headway behind a constant-speed lead.");
}
