#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"
#include "agentsim/host.hpp"
#include "agentsim/lane_map.hpp"
#include "agentsim/messages.hpp"
#include "agentsim/simulation.hpp"
#include "agentsim/testkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw agentsim::Error("cannot open file '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw agentsim::Error("cannot write file '" + path.string() + "'");
  out << bytes;
  if (!bytes.empty() && bytes.back() != '\n') out << '\n';
}

std::string out_root() {
  if (const char* env = std::getenv("AGENTSIM_OUT")) return env;
  return "out";
}

agentsim::StepOrder parse_order(const std::string& s) {
  if (s == "forward") return agentsim::StepOrder::forward;
  if (s == "reverse") return agentsim::StepOrder::reverse;
  if (s == "shuffled") return agentsim::StepOrder::shuffled;
  throw agentsim::ParseError("unknown step order '" + s + "' (forward|reverse|shuffled)");
}

struct RunArgs {
  std::string scenario;
  std::string out;
  std::string order = "forward";
  std::uint64_t seed = 1;
  bool parallel = false;
  bool record_io = false;
  double sensor_range = 150.0;
  unsigned log_every = 1;
  std::optional<double> duration;
  std::vector<std::string> sets;
};

void apply_sets(agentsim::Scenario& sc, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw agentsim::ParseError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    std::size_t used = 0;
    double num = 0.0;
    try {
      num = std::stod(val, &used);
    } catch (const std::exception&) {
      throw agentsim::ParseError("--set " + key + ": value '" + val + "' is not numeric");
    }
    if (used != val.size())
      throw agentsim::ParseError("--set " + key + ": value '" + val + "' is not numeric");
    for (auto& agent : sc.agents) agent.parameters[key] = num;
  }
}

int cmd_run(const RunArgs& args) {
  agentsim::Scenario sc = agentsim::load_scenario(args.scenario);
  if (args.duration) sc.duration = *args.duration;
  apply_sets(sc, args.sets);

  agentsim::RunOptions opts;
  opts.order = parse_order(args.order);
  opts.shuffle_seed = args.seed;
  opts.parallel = args.parallel;
  opts.record_io = args.record_io;
  opts.sensor_range = args.sensor_range;
  opts.log_every = args.log_every;

  const agentsim::RunResult result = agentsim::run_scenario(sc, opts);

  const fs::path out = args.out.empty() ? fs::path(out_root()) / sc.name : fs::path(args.out);
  agentsim::write_csv_logs(result, out.string());
  agentsim::write_events_json(result, (out / "events.json").string());
  write_file(out / "report.json", agentsim::run_report_json(sc, result));
  write_file(out / "descriptor.json",
             agentsim::descriptor_to_json(agentsim::agent_descriptor()));
  if (opts.record_io) {
    for (std::size_t i = 0; i < result.io_records.size(); ++i)
      write_file(out / (sc.agents[i].id + ".io.json"),
                 agentsim::records_to_json(result.io_records[i]));
  }

  std::printf("scenario '%s': %zu agents, %zu steps, sim %.2f s, wall %.3f s, rtf %.1f\n",
              sc.name.c_str(), sc.agents.size(), result.steps, result.sim_s, result.wall_s,
              result.rtf);
  std::printf("events: %zu (%s)\n", result.events.size(),
              result.collision ? "collision detected" : "no collision");
  std::printf("logs written to %s\n", out.string().c_str());
  return 0;
}

int cmd_catalog(const std::string& path, std::string out_dir, const std::string& order,
                std::uint64_t seed, bool parallel) {
  const agentsim::Catalog cat = agentsim::load_catalog(path);
  agentsim::RunOptions opts;
  opts.order = parse_order(order);
  opts.shuffle_seed = seed;
  opts.parallel = parallel;
  const agentsim::CatalogReport rep = agentsim::run_catalog(cat, opts);

  const fs::path out = out_dir.empty() ? fs::path(out_root()) / ("catalog_" + cat.name)
                                       : fs::path(out_dir);
  write_file(out / "report.json", agentsim::catalog_report_to_json(rep));

  for (const auto& run : rep.runs) {
    std::printf("%s run '%s' (%.2f s)\n", run.pass ? "PASS" : "FAIL", run.name.c_str(),
                run.wall_s);
    for (const auto& res : run.results) {
      std::printf("  %s %-28s %-22s value=%-12.6g expect [%g, %g]\n",
                  res.pass ? "PASS" : "FAIL", res.criterion.name.c_str(),
                  res.criterion.kind.c_str(), res.value, res.criterion.expect_min,
                  res.criterion.expect_max);
    }
  }
  std::printf("%s: %zu/%zu runs passed; report at %s\n", rep.all_pass ? "ALL PASS" : "FAILURES",
              static_cast<std::size_t>(
                  std::count_if(rep.runs.begin(), rep.runs.end(),
                                [](const auto& r) { return r.pass; })),
              rep.runs.size(), (out / "report.json").string().c_str());
  return rep.all_pass ? 0 : 1;
}

int cmd_bench(const std::string& counts_csv, double duration, int replicates, bool parallel,
              std::string out_dir) {
  std::vector<std::size_t> counts;
  std::size_t pos = 0;
  while (pos < counts_csv.size()) {
    const auto comma = counts_csv.find(',', pos);
    const std::string tok = counts_csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      counts.push_back(static_cast<std::size_t>(std::stoul(tok)));
    } catch (const std::exception&) {
      throw agentsim::ParseError("--counts: '" + tok + "' is not a positive integer");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (counts.empty()) throw agentsim::ParseError("--counts: empty list");

  const agentsim::BenchReport rep =
      agentsim::bench_scalability(counts, duration, replicates, parallel);

  const fs::path out = out_dir.empty() ? fs::path(out_root()) / "bench" : fs::path(out_dir);
  write_file(out / "bench.json", agentsim::bench_report_to_json(rep));
  write_file(out / "bench.csv", agentsim::bench_report_to_csv(rep));

  std::printf("agents  wall_s   rtf     rss_mb\n");
  for (const auto& pt : rep.points)
    std::printf("%-7zu %-8.3f %-7.1f %.1f\n", pt.agents, pt.wall_s, pt.rtf, pt.rss_mb);
  std::printf("fit: wall = %.4f + %.4f * n  (R^2 = %.4f)\n", rep.intercept, rep.slope, rep.r2);
  std::printf("data written to %s\n", out.string().c_str());
  return 0;
}

int cmd_genroad(bool intersection, double radius, double spiral, double line, double width,
                double arc_deg, double arm, double turn_radius, const std::string& out_path) {
  agentsim::MapModel map;
  if (intersection) {
    map = agentsim::generate_intersection(arm, turn_radius, width);
  } else {
    map = agentsim::generate_test_road(radius, spiral, line, width, arc_deg * M_PI / 180.0);
  }
  const std::string bytes = agentsim::map_to_json(map);
  agentsim::load_map_from_json(bytes);  // self-check before writing
  write_file(out_path, bytes);
  std::printf("wrote %s (%zu lanes, version %s)\n", out_path.c_str(), map.lanes.size(),
              map.version.c_str());
  return 0;
}

int cmd_validate(const std::string& map_path, const std::string& scenario_path,
                 const std::string& message_path) {
  const int selected = (!map_path.empty()) + (!scenario_path.empty()) + (!message_path.empty());
  if (selected != 1) {
    std::fprintf(stderr, "validate: pass exactly one of --map, --scenario, --message\n");
    return 2;
  }
  try {
    if (!map_path.empty()) {
      const std::string bytes = read_file(map_path);
      const agentsim::MapModel map = agentsim::load_map_from_json(bytes);
      std::printf("OK: map '%s' (%zu lanes, %zu signals)\n", map.version.c_str(),
                  map.lanes.size(), map.signals.size());
      return 0;
    }
    if (!scenario_path.empty()) {
      const std::string bytes = read_file(scenario_path);
      const agentsim::Scenario sc = agentsim::scenario_from_json(
          bytes, fs::path(scenario_path).parent_path().string());
      std::printf("OK: scenario '%s' (%zu agents, duration %.2f s)\n", sc.name.c_str(),
                  sc.agents.size(), sc.duration);
      return 0;
    }
    const std::string bytes = read_file(message_path);
    json probe = json::parse(bytes, nullptr, false);
    if (probe.is_discarded() || !probe.is_object() || !probe.contains("type")) {
      std::printf("INVALID: not a typed message object\n");
      return 1;
    }
    const std::string type = probe["type"].get<std::string>();
    if (type == "SensorView") {
      const auto view = agentsim::decode<agentsim::SensorView>(bytes);
      const auto findings = agentsim::validate_sensor_view(view);
      for (const auto& f : findings)
        std::printf("finding: %s: %s\n", f.field.c_str(), f.message.c_str());
      if (!findings.empty()) return 1;
    } else if (type == "TrafficCommand") {
      agentsim::decode<agentsim::TrafficCommand>(bytes);
    } else if (type == "MotionRequest") {
      agentsim::decode<agentsim::MotionRequest>(bytes);
    } else if (type == "TrafficUpdate") {
      agentsim::decode<agentsim::TrafficUpdate>(bytes);
    } else {
      std::printf("INVALID: unknown message type '%s'\n", type.c_str());
      return 1;
    }
    std::printf("OK: %s\n", type.c_str());
    return 0;
  } catch (const agentsim::ParseError& e) {
    std::printf("INVALID: %s\n", e.what());
    return 1;
  } catch (const agentsim::DecodeError& e) {
    std::printf("INVALID: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop driver-agent simulation workbench"};
  app.require_subcommand(1);

  // run
  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "simulate one scenario and write logs");
  run->add_option("scenario", run_args.scenario, "scenario JSON file")->required();
  run->add_option("--out", run_args.out, "output directory (default: $AGENTSIM_OUT/<name>)");
  run->add_option("--order", run_args.order, "agent step order: forward|reverse|shuffled");
  run->add_option("--seed", run_args.seed, "shuffle seed");
  run->add_flag("--parallel", run_args.parallel, "step agents on multiple threads");
  run->add_flag("--record-io", run_args.record_io, "capture per-step boundary messages");
  run->add_option("--sensor-range", run_args.sensor_range, "view radius in m");
  run->add_option("--log-every", run_args.log_every, "keep every n-th log row");
  double duration_override = -1.0;
  CLI::Option* dur_opt = run->add_option("--duration", duration_override, "override duration [s]");
  run->add_option("--set", run_args.sets, "parameter override key=value for all agents");

  // catalog
  std::string catalog_path, catalog_out, catalog_order = "forward";
  std::uint64_t catalog_seed = 1;
  bool catalog_parallel = false;
  CLI::App* cata = app.add_subcommand("catalog", "run a scenario catalog against its criteria");
  cata->add_option("catalog", catalog_path, "catalog JSON file")->required();
  cata->add_option("--out", catalog_out, "output directory");
  cata->add_option("--order", catalog_order, "agent step order");
  cata->add_option("--seed", catalog_seed, "shuffle seed");
  cata->add_flag("--parallel", catalog_parallel, "step agents on multiple threads");

  // bench
  std::string bench_counts = "1,5,10,20,40", bench_out;
  double bench_duration = 20.0;
  int bench_replicates = 3;
  bool bench_parallel = false;
  CLI::App* bench = app.add_subcommand("bench", "scalability benchmark on a straight road");
  bench->add_option("--counts", bench_counts, "comma-separated agent counts");
  bench->add_option("--duration", bench_duration, "simulated seconds per point");
  bench->add_option("--replicates", bench_replicates, "runs per point (median)");
  bench->add_flag("--parallel", bench_parallel, "step agents on multiple threads");
  bench->add_option("--out", bench_out, "output directory");

  // genroad
  bool gen_intersection = false;
  double gen_radius = 100.0, gen_spiral = 60.0, gen_line = 150.0, gen_width = 3.5;
  double gen_arc_deg = 90.0, gen_arm = 160.0, gen_turn_radius = 12.0;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("genroad", "generate a test road or intersection map");
  gen->add_option("--out", gen_out, "output map file")->required();
  gen->add_flag("--intersection", gen_intersection, "four-arm right-turn intersection");
  gen->add_option("--radius", gen_radius, "arc radius [m]");
  gen->add_option("--spiral", gen_spiral, "transition length [m]");
  gen->add_option("--line", gen_line, "straight length [m]");
  gen->add_option("--width", gen_width, "lane width [m]");
  gen->add_option("--arc-deg", gen_arc_deg, "arc angle [deg]");
  gen->add_option("--arm", gen_arm, "intersection arm length [m]");
  gen->add_option("--turn-radius", gen_turn_radius, "intersection corner radius [m]");

  // validate
  std::string val_map, val_scenario, val_message;
  CLI::App* val = app.add_subcommand("validate", "validate a map, scenario, or message file");
  val->add_option("--map", val_map, "map JSON file");
  val->add_option("--scenario", val_scenario, "scenario JSON file");
  val->add_option("--message", val_message, "message JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      if (dur_opt->count() > 0) run_args.duration = duration_override;
      return cmd_run(run_args);
    }
    if (cata->parsed())
      return cmd_catalog(catalog_path, catalog_out, catalog_order, catalog_seed,
                         catalog_parallel);
    if (bench->parsed())
      return cmd_bench(bench_counts, bench_duration, bench_replicates, bench_parallel, bench_out);
    if (gen->parsed())
      return cmd_genroad(gen_intersection, gen_radius, gen_spiral, gen_line, gen_width,
                         gen_arc_deg, gen_arm, gen_turn_radius, gen_out);
    if (val->parsed()) return cmd_validate(val_map, val_scenario, val_message);
  } catch (const agentsim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
