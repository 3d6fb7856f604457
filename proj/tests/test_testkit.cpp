#include <cmath>
#include <string>
#include <vector>

#include "agentsim/errors.hpp"
#include "agentsim/testkit.hpp"
#include "doctest.h"

using namespace agentsim;

namespace {

AgentTrace ramp_trace() {
  // v ramps 0..10 over t in [0, 10]; a = 1 up to t=5 then -1; d oscillates.
  AgentTrace tr;
  tr.id = "ego";
  for (int k = 0; k <= 100; ++k) {
    LogRow row;
    row.t = 0.1 * k;
    row.v = row.t;
    row.a = row.t < 5.0 ? 1.0 : -1.0;
    row.d = (k % 2 == 0) ? 1e-6 : -1e-6;  // sub-deadband jitter
    row.kappa_des = row.t < 3.0 ? 0.01 : (row.t < 7.0 ? -0.02 : 0.03);
    tr.rows.push_back(row);
  }
  return tr;
}

RunResult synthetic_result() {
  RunResult r;
  r.traces.push_back(ramp_trace());
  r.events = {
      {1.0, "lane_change_start", "ego", "", ""},
      {4.5, "lane_change_end", "ego", "", ""},
      {2.0, "signal_passed", "ego", "", ""},
      {6.0, "signal_passed", "ego", "", ""},
      {7.0, "collision", "ego", "npc", ""},
  };
  r.steps = 100;
  r.sim_s = 10.0;
  return r;
}

}  // namespace

TEST_CASE("channels: every log column is addressable; unknown names throw") {
  const AgentTrace tr = ramp_trace();
  for (const char* name : {"t", "x", "y", "yaw", "v", "a", "thw", "d", "kappa_des",
                           "a_des", "v_t_pred", "a_lat", "yaw_offset", "s"}) {
    CHECK_NOTHROW(channel_fn(name)(tr.rows[0]));
  }
  CHECK_THROWS_AS(channel_fn("velocity"), ParseError);
  CHECK_THROWS_AS(trace_of(synthetic_result(), "ghost"), ParseError);
}

TEST_CASE("metrics: min/max/final with time windows") {
  const AgentTrace tr = ramp_trace();
  CHECK(min_value(tr, "v") == doctest::Approx(0.0));
  CHECK(max_value(tr, "v") == doctest::Approx(10.0));
  CHECK(min_value(tr, "v", 2.0, 4.0) == doctest::Approx(2.0));
  CHECK(max_value(tr, "v", 2.0, 4.0) == doctest::Approx(4.0));
  CHECK(final_value(tr, "v") == doctest::Approx(10.0));
  CHECK(min_value(tr, "a", 6.0) == doctest::Approx(-1.0));
}

TEST_CASE("metrics: settle_value averages the trailing fraction") {
  AgentTrace tr;
  tr.id = "x";
  for (int k = 0; k < 100; ++k) {
    LogRow row;
    row.t = 0.1 * k;
    row.v = k < 80 ? 10.0 : 20.0;  // last 20% at 20
    tr.rows.push_back(row);
  }
  CHECK(settle_value(tr, "v", 0.2) == doctest::Approx(20.0));
  CHECK(settle_value(tr, "v", 0.5) == doctest::Approx((30.0 * 10 + 20.0 * 20) / 50.0));
}

TEST_CASE("metrics: settle_time finds the earliest permanent entry into the band") {
  AgentTrace tr;
  tr.id = "x";
  for (int k = 0; k <= 100; ++k) {
    LogRow row;
    row.t = 0.1 * k;
    // Dips into the band around t=3, leaves, then settles from t=6 on.
    row.v = (k >= 28 && k <= 34) ? 5.0 : (k >= 60 ? 5.02 : 8.0);
    tr.rows.push_back(row);
  }
  CHECK(settle_time(tr, "v", 5.0, 0.1) == doctest::Approx(6.0));
  CHECK(std::isinf(settle_time(tr, "v", 99.0, 0.1)));
}

TEST_CASE("metrics: sign_changes honors the deadband") {
  const AgentTrace tr = ramp_trace();
  // kappa_des: +0.01 then -0.02 then +0.03 -> two sign changes.
  CHECK(sign_changes(tr, "kappa_des", 1e-4) == 2);
  // d jitters at 1e-6 under the 1e-4 deadband: no changes.
  CHECK(sign_changes(tr, "d", 1e-4) == 0);
  // With a tiny deadband the jitter counts.
  CHECK(sign_changes(tr, "d", 1e-9) > 50);
}

TEST_CASE("metrics: onset_time requires the excursion to be sustained") {
  AgentTrace tr;
  tr.id = "x";
  for (int k = 0; k <= 200; ++k) {
    LogRow row;
    row.t = 0.05 * k;
    // Brief dip at t in [2, 2.2); sustained drop from t=5.
    const double t = row.t;
    row.a = (t >= 2.0 && t < 2.2) ? -1.0 : (t >= 5.0 ? -1.0 : 0.0);
    tr.rows.push_back(row);
  }
  const auto onset = onset_time(tr, "a", -0.5, true, 0.5);
  REQUIRE(onset.has_value());
  CHECK(*onset == doctest::Approx(5.0));
  const auto quick = onset_time(tr, "a", -0.5, true, 0.1);
  REQUIRE(quick.has_value());
  CHECK(*quick == doctest::Approx(2.0));
  CHECK_FALSE(onset_time(tr, "a", -5.0, true, 0.1).has_value());
}

TEST_CASE("events: lookup by type, agent and occurrence") {
  const RunResult r = synthetic_result();
  CHECK(event_count(r, "signal_passed") == 2);
  CHECK(event_count(r, "signal_passed", "ego") == 2);
  CHECK(event_count(r, "signal_passed", "npc") == 0);
  CHECK(*event_time(r, "signal_passed") == doctest::Approx(2.0));
  CHECK(*event_time(r, "signal_passed", "", 2) == doctest::Approx(6.0));
  CHECK_FALSE(event_time(r, "signal_passed", "", 3).has_value());
  CHECK_FALSE(event_time(r, "goal_reached").has_value());
}

TEST_CASE("criteria: JSON parsing incl. the expect block") {
  const Criterion c = criterion_from_json(R"({
    "name": "settles", "kind": "settle_value", "agent": "ego", "channel": "thw",
    "tail_fraction": 0.25, "expect": {"equals": 2.0, "tol": 0.1}})");
  CHECK(c.name == "settles");
  CHECK(c.kind == "settle_value");
  CHECK(c.tail_fraction == doctest::Approx(0.25));
  CHECK(c.expect_min == doctest::Approx(1.9));
  CHECK(c.expect_max == doctest::Approx(2.1));
  CHECK_THROWS_AS(criterion_from_json("{"), ParseError);
  CHECK_THROWS_AS(criterion_from_json(R"({"name":"x"})"), ParseError);  // no kind
}

TEST_CASE("criteria: evaluation across all kinds on a synthetic run") {
  const RunResult r = synthetic_result();

  Criterion c;
  c.name = "max v";
  c.kind = "max_value";
  c.agent = "ego";
  c.channel = "v";
  c.expect_max = 10.5;
  CHECK(evaluate(c, r).pass);
  c.expect_max = 9.5;
  CHECK_FALSE(evaluate(c, r).pass);

  Criterion cc;
  cc.name = "collisions";
  cc.kind = "collision_count";
  cc.expect_max = 0.0;
  const CriterionResult res = evaluate(cc, r);
  CHECK(res.value == doctest::Approx(1.0));
  CHECK_FALSE(res.pass);

  Criterion ev;
  ev.name = "maneuver duration";
  ev.kind = "duration_between_events";
  ev.event_a = "lane_change_start";
  ev.event_b = "lane_change_end";
  ev.expect_min = 0.0;
  ev.expect_max = 5.0;
  const CriterionResult dres = evaluate(ev, r);
  CHECK(dres.value == doctest::Approx(3.5));
  CHECK(dres.pass);

  Criterion missing;
  missing.name = "missing agent";
  missing.kind = "min_value";
  missing.agent = "ghost";
  missing.channel = "v";
  CHECK_THROWS_AS(evaluate(missing, r), ParseError);

  Criterion unknown;
  unknown.name = "bogus kind";
  unknown.kind = "median_value";
  CHECK_THROWS_AS(evaluate(unknown, r), ParseError);
}

TEST_CASE("catalog: loading resolves scenario paths against the catalog file") {
  const Catalog cat = load_catalog("catalog/nominal.json");
  CHECK(cat.name == "nominal");
  CHECK(cat.runs.size() == 9);
  for (const auto& run : cat.runs) {
    CHECK(!run.criteria.empty());
    // Paths must already be usable from the current directory.
    CHECK_NOTHROW(load_scenario(run.scenario_path));
  }
  CHECK_THROWS_AS(load_catalog("catalog/does_not_exist.json"), ParseError);
}

TEST_CASE("run report: per-agent summary JSON") {
  const Scenario sc = load_scenario("scenarios/free_cruise.json");
  const RunResult r = run_scenario(sc);
  const std::string js = run_report_json(sc, r);
  CHECK(js.find("\"type\": \"RunReport\"") != std::string::npos);
  CHECK(js.find("\"scenario\": \"free_cruise\"") != std::string::npos);
  CHECK(js.find("max_abs_a") != std::string::npos);
  CHECK(js.find("\"id\": \"ego\"") != std::string::npos);
}

TEST_CASE("bench: platoon scenario construction") {
  const Scenario sc = make_bench_scenario(7, 20.0);
  CHECK(sc.agents.size() == 7);
  CHECK(sc.duration == doctest::Approx(20.0));
  REQUIRE(sc.map.lanes.size() == 1);
  // All agents seated on the one lane with distinct spacing.
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    CHECK(sc.map.has_lane(sc.agents[i].lane_id));
    for (std::size_t k = i + 1; k < sc.agents.size(); ++k)
      CHECK(std::abs(sc.agents[i].s - sc.agents[k].s) >= 10.0);
  }
}

TEST_CASE("bench: two-point fit is exact and the report serializes") {
  const BenchReport rep = bench_scalability({1, 2}, 2.0, 1);
  REQUIRE(rep.points.size() == 2);
  CHECK(rep.points[0].agents == 1);
  CHECK(rep.points[1].agents == 2);
  CHECK(rep.points[0].wall_s > 0.0);
  // A line through two points fits exactly.
  CHECK(rep.r2 == doctest::Approx(1.0).epsilon(1e-9));
  const std::string js = bench_report_to_json(rep);
  CHECK(js.find("\"points\"") != std::string::npos);
  const std::string csv = bench_report_to_csv(rep);
  CHECK(csv.find("agents") != std::string::npos);
  CHECK(process_rss_mb() > 1.0);
}
