#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "agentsim/simulation.hpp"

namespace agentsim {

// --- trace metrics -----------------------------------------------------------------
// Channels address LogRow fields by name: t, x, y, yaw, v, a, thw, d,
// kappa_des, a_des, v_t_pred, a_lat, yaw_offset, s.

std::function<double(const LogRow&)> channel_fn(const std::string& name);

const AgentTrace& trace_of(const RunResult& r, const std::string& agent_id);

double min_value(const AgentTrace& tr, const std::string& channel, double t_from = 0.0,
                 double t_to = std::numeric_limits<double>::infinity());
double max_value(const AgentTrace& tr, const std::string& channel, double t_from = 0.0,
                 double t_to = std::numeric_limits<double>::infinity());
double final_value(const AgentTrace& tr, const std::string& channel);

/// Mean over the trailing fraction of the trace.
double settle_value(const AgentTrace& tr, const std::string& channel, double tail_fraction = 0.2);

/// Earliest time from which the channel stays within +-band of target until
/// the end of the trace; +inf if it never settles.
double settle_time(const AgentTrace& tr, const std::string& channel, double target, double band,
                   double t_from = 0.0);

/// Zero crossings of the channel, ignoring excursions smaller than deadband.
int sign_changes(const AgentTrace& tr, const std::string& channel, double deadband = 1e-4);

/// First time the channel drops below (or rises above) a threshold and stays
/// there for at least sustain_s.
std::optional<double> onset_time(const AgentTrace& tr, const std::string& channel,
                                 double threshold, bool below, double sustain_s,
                                 double t_from = 0.0);

std::optional<double> event_time(const RunResult& r, const std::string& type,
                                 const std::string& agent = "", int occurrence = 1);
int event_count(const RunResult& r, const std::string& type, const std::string& agent = "");

// --- catalog criteria ------------------------------------------------------------------

struct Criterion {
  std::string name;
  std::string kind;     // settle_value, min_value, max_value, final_value, settle_time,
                        // sign_changes, collision_count, event_count, event_time,
                        // duration_between_events
  std::string agent;    // trace-based kinds
  std::string channel;  // trace-based kinds
  double t_from = 0.0;
  double t_to = std::numeric_limits<double>::infinity();
  double tail_fraction = 0.2;
  double deadband = 1e-4;
  double target = 0.0;  // settle_time
  double band = 0.0;    // settle_time
  std::string event_a, event_b;
  int occurrence_a = 1, occurrence_b = 1;
  double expect_min = -std::numeric_limits<double>::infinity();
  double expect_max = std::numeric_limits<double>::infinity();
};

Criterion criterion_from_json(const std::string& bytes);

struct CriterionResult {
  Criterion criterion;
  double value = 0.0;
  bool pass = false;
};

CriterionResult evaluate(const Criterion& c, const RunResult& r);

// --- catalog ---------------------------------------------------------------------------

struct CatalogRun {
  std::string name;
  std::string scenario_path;  // resolved against the catalog file location
  std::vector<Criterion> criteria;
};

struct Catalog {
  std::string name;
  std::vector<CatalogRun> runs;
};

Catalog load_catalog(const std::string& path);

struct CatalogRunReport {
  std::string name;
  std::string scenario;
  std::vector<CriterionResult> results;
  bool pass = false;
  double wall_s = 0.0;
};

struct CatalogReport {
  std::string name;
  std::vector<CatalogRunReport> runs;
  bool all_pass = false;
};

CatalogReport run_catalog(const Catalog& cat, const RunOptions& opts = {});
std::string catalog_report_to_json(const CatalogReport& rep);

/// Per-run summary written next to the logs.
std::string run_report_json(const Scenario& sc, const RunResult& r);

// --- scalability benchmark ----------------------------------------------------------------

struct BenchPoint {
  std::size_t agents = 0;
  double wall_s = 0.0;  // median over replicates
  double rtf = 0.0;
  double rss_mb = 0.0;
};

struct BenchReport {
  std::vector<BenchPoint> points;
  double slope = 0.0;      // wall seconds per agent
  double intercept = 0.0;  // wall seconds
  double r2 = 0.0;         // of the linear fit wall(n)
  double sim_s = 0.0;
  int replicates = 0;
};

/// Straight-road platoon benchmark: n agents, fixed spacing, fixed duration.
Scenario make_bench_scenario(std::size_t n_agents, double duration);
BenchReport bench_scalability(const std::vector<std::size_t>& counts, double duration = 20.0,
                              int replicates = 3, bool parallel = false);
std::string bench_report_to_json(const BenchReport& rep);
std::string bench_report_to_csv(const BenchReport& rep);

double process_rss_mb();

}  // namespace agentsim
