#include "agentsim/lane_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agentsim/errors.hpp"

namespace agentsim {

using nlohmann::json;

double Lane::curvature_at(double s) const {
  const auto& pts = centerline.points();
  const auto& cum = centerline.cumulative();
  const std::size_t n = pts.size();
  if (n < 3) return 0.0;
  // Curvature samples live at interior vertices 1 .. n-2.
  const auto kappa_at_vertex = [&](std::size_t i) {
    return menger_curvature(pts[i - 1], pts[i], pts[i + 1]);
  };
  if (s <= cum[1]) return kappa_at_vertex(1);
  if (s >= cum[n - 2]) return kappa_at_vertex(n - 2);
  auto it = std::upper_bound(cum.begin() + 1, cum.begin() + (n - 1), s);
  const std::size_t hi = it - cum.begin();
  const std::size_t lo = hi - 1;
  const double span = cum[hi] - cum[lo];
  const double t = span > 0.0 ? (s - cum[lo]) / span : 0.0;
  const double k0 = kappa_at_vertex(lo);
  const double k1 = kappa_at_vertex(hi);
  return k0 + (k1 - k0) * t;
}

const Lane& MapModel::lane(const std::string& id) const {
  const auto it = lanes.find(id);
  if (it == lanes.end()) throw ParseError("unknown lane '" + id + "'");
  return it->second;
}

namespace {

[[noreturn]] void fail(const std::string& ctx, const std::string& why) {
  throw ParseError(ctx + ": " + why);
}

double want_num(const json& j, const char* field, const std::string& ctx) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_number()) fail(ctx, std::string("missing numeric field '") + field + "'");
  return it->get<double>();
}

std::string want_str(const json& j, const char* field, const std::string& ctx) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_string()) fail(ctx, std::string("missing string field '") + field + "'");
  return it->get<std::string>();
}

Lane lane_from_json(const json& j, const std::string& ctx) {
  Lane lane;
  lane.id = want_str(j, "id", ctx);
  const std::string lane_ctx = ctx + ": lane '" + lane.id + "'";
  lane.width = j.contains("width") ? want_num(j, "width", lane_ctx) : 3.5;
  if (!(lane.width > 0.0)) fail(lane_ctx, "width must be positive");

  if (j.contains("speed_limit") && !j["speed_limit"].is_null()) {
    if (!j["speed_limit"].is_number()) fail(lane_ctx, "speed_limit must be a number or null");
    lane.speed_limit = j["speed_limit"].get<double>();
    if (!(*lane.speed_limit > 0.0)) fail(lane_ctx, "speed_limit must be positive");
  }

  const auto cl = j.find("centerline");
  if (cl == j.end() || !cl->is_array() || cl->size() < 2)
    fail(lane_ctx, "centerline must be an array of at least 2 points");
  std::vector<Vec2> pts;
  pts.reserve(cl->size());
  for (const auto& p : *cl) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      fail(lane_ctx, "centerline points must be [x, y] number pairs");
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (norm(pts[i] - pts[i - 1]) < 1e-9)
      fail(lane_ctx, "consecutive centerline points must be distinct (index " +
                         std::to_string(i) + ")");
  lane.centerline = Polyline(std::move(pts));

  if (j.contains("successors")) {
    if (!j["successors"].is_array()) fail(lane_ctx, "successors must be an array");
    for (const auto& s : j["successors"]) {
      if (!s.is_string()) fail(lane_ctx, "successors must be lane-id strings");
      lane.successors.push_back(s.get<std::string>());
    }
  }
  if (j.contains("left_neighbor") && !j["left_neighbor"].is_null())
    lane.left_neighbor = j["left_neighbor"].get<std::string>();
  if (j.contains("right_neighbor") && !j["right_neighbor"].is_null())
    lane.right_neighbor = j["right_neighbor"].get<std::string>();

  if (j.contains("crossing_zones")) {
    if (!j["crossing_zones"].is_array()) fail(lane_ctx, "crossing_zones must be an array");
    for (const auto& z : j["crossing_zones"]) {
      if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number())
        fail(lane_ctx, "crossing zones must be [s0, s1] number pairs");
      const double a = z[0].get<double>();
      const double b = z[1].get<double>();
      if (!(a >= 0.0) || !(b > a) || b > lane.length() + 1e-6)
        fail(lane_ctx, "crossing zone [" + std::to_string(a) + ", " + std::to_string(b) +
                           "] outside [0, length]");
      lane.crossing_zones.emplace_back(a, b);
    }
  }
  return lane;
}

void cross_validate(MapModel& map, const std::string& ctx) {
  for (const auto& [id, lane] : map.lanes) {
    const std::string lane_ctx = ctx + ": lane '" + id + "'";
    for (const auto& succ : lane.successors)
      if (!map.has_lane(succ)) fail(lane_ctx, "successor references unknown lane '" + succ + "'");
    if (lane.left_neighbor) {
      if (!map.has_lane(*lane.left_neighbor))
        fail(lane_ctx, "left_neighbor references unknown lane '" + *lane.left_neighbor + "'");
      const Lane& nb = map.lanes.at(*lane.left_neighbor);
      if (!nb.right_neighbor || *nb.right_neighbor != id)
        fail(lane_ctx, "neighbor relation asymmetric: left_neighbor '" + *lane.left_neighbor +
                           "' does not declare '" + id + "' as right_neighbor");
    }
    if (lane.right_neighbor) {
      if (!map.has_lane(*lane.right_neighbor))
        fail(lane_ctx, "right_neighbor references unknown lane '" + *lane.right_neighbor + "'");
      const Lane& nb = map.lanes.at(*lane.right_neighbor);
      if (!nb.left_neighbor || *nb.left_neighbor != id)
        fail(lane_ctx, "neighbor relation asymmetric: right_neighbor '" + *lane.right_neighbor +
                           "' does not declare '" + id + "' as left_neighbor");
    }
  }
  for (std::size_t i = 0; i < map.signals.size(); ++i) {
    const auto& sig = map.signals[i];
    const std::string sig_ctx = ctx + ": signals[" + std::to_string(i) + "]";
    if (!map.has_lane(sig.lane_id)) fail(sig_ctx, "references unknown lane '" + sig.lane_id + "'");
    const double len = map.lanes.at(sig.lane_id).length();
    if (sig.s < 0.0 || sig.s > len + 1e-6)
      fail(sig_ctx, "s=" + std::to_string(sig.s) + " outside lane '" + sig.lane_id + "' [0, " +
                        std::to_string(len) + "]");
    if (sig.kind == SignalObservation::Kind::speed_limit && !(sig.value > 0.0))
      fail(sig_ctx, "speed limit value must be positive");
  }
}

}  // namespace

MapModel load_map_from_json(const std::string& text, const std::string& context) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(context, std::string("JSON syntax error (") + e.what() + ")");
  }
  if (!j.is_object()) fail(context, "root is not an object");

  MapModel map;
  map.version = j.contains("version") && j["version"].is_string()
                    ? j["version"].get<std::string>()
                    : "";
  if (map.version.empty()) fail(context, "missing string field 'version'");

  const auto lanes = j.find("lanes");
  if (lanes == j.end() || !lanes->is_array() || lanes->empty())
    fail(context, "missing non-empty array field 'lanes'");
  for (const auto& lj : *lanes) {
    Lane lane = lane_from_json(lj, context);
    if (map.lanes.count(lane.id)) fail(context, "duplicate lane id '" + lane.id + "'");
    map.lanes.emplace(lane.id, std::move(lane));
  }

  if (j.contains("signals")) {
    if (!j["signals"].is_array()) fail(context, "signals must be an array");
    std::size_t i = 0;
    for (const auto& sj : j["signals"]) {
      const std::string sig_ctx = context + ": signals[" + std::to_string(i++) + "]";
      SignalObservation sig;
      const std::string kind = want_str(sj, "kind", sig_ctx);
      if (kind == "speed_limit") sig.kind = SignalObservation::Kind::speed_limit;
      else if (kind == "stop_line") sig.kind = SignalObservation::Kind::stop_line;
      else fail(sig_ctx, "unknown signal kind '" + kind + "'");
      sig.lane_id = want_str(sj, "lane", sig_ctx);
      sig.s = want_num(sj, "s", sig_ctx);
      sig.value = sj.contains("value") ? want_num(sj, "value", sig_ctx) : 0.0;
      map.signals.push_back(sig);
    }
  }

  cross_validate(map, context);
  return map;
}

MapModel load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_map_from_json(ss.str(), path);
}

std::string map_to_json(const MapModel& map) {
  json lanes = json::array();
  for (const auto& [id, lane] : map.lanes) {
    json lj{{"id", id}, {"width", lane.width}};
    lj["speed_limit"] = lane.speed_limit ? json(*lane.speed_limit) : json(nullptr);
    json pts = json::array();
    for (const auto& p : lane.centerline.points()) pts.push_back(json::array({p.x, p.y}));
    lj["centerline"] = std::move(pts);
    lj["successors"] = lane.successors;
    if (lane.left_neighbor) lj["left_neighbor"] = *lane.left_neighbor;
    if (lane.right_neighbor) lj["right_neighbor"] = *lane.right_neighbor;
    if (!lane.crossing_zones.empty()) {
      json zones = json::array();
      for (const auto& [a, b] : lane.crossing_zones) zones.push_back(json::array({a, b}));
      lj["crossing_zones"] = std::move(zones);
    }
    lanes.push_back(std::move(lj));
  }
  json signals = json::array();
  for (const auto& sig : map.signals) {
    json sj{{"kind", sig.kind == SignalObservation::Kind::speed_limit ? "speed_limit" : "stop_line"},
            {"lane", sig.lane_id},
            {"s", sig.s}};
    if (sig.kind == SignalObservation::Kind::speed_limit) sj["value"] = sig.value;
    signals.push_back(std::move(sj));
  }
  return json{{"version", map.version}, {"lanes", std::move(lanes)}, {"signals", std::move(signals)}}
      .dump(2);
}

namespace {

// Search node: a lane entered either at s=0 (after a successor hop) or at the
// start position's s (start lane and lanes reached from it by neighbor edges
// only; lane changes do not advance s).
struct SearchLabel {
  double cost{0.0};
  int lane_changes{0};
  std::vector<Route::Step> steps;
  std::string lane;
  double entry_s{0.0};
  bool offset_entry{true};  // true while entry_s is the start offset

  std::vector<std::string> path_ids() const {
    std::vector<std::string> ids;
    ids.reserve(steps.size());
    for (const auto& st : steps) ids.push_back(st.lane_id);
    return ids;
  }
};

// Ordering for the priority queue and for final candidate selection:
// cost, then lane changes, then lexicographic lane-id sequence.
bool label_greater(const SearchLabel& a, const SearchLabel& b) {
  if (a.cost != b.cost) return a.cost > b.cost;
  if (a.lane_changes != b.lane_changes) return a.lane_changes > b.lane_changes;
  return a.path_ids() > b.path_ids();
}

}  // namespace

Route shortest_route(const MapModel& map, const std::string& from_lane, double from_s,
                     const std::string& to_lane, double to_s, double lane_change_penalty) {
  if (!map.has_lane(from_lane)) throw NoRouteError("start lane '" + from_lane + "' not in map");
  if (!map.has_lane(to_lane)) throw NoRouteError("goal lane '" + to_lane + "' not in map");
  const double from_len = map.lanes.at(from_lane).length();
  if (from_s < -1e-6 || from_s > from_len + 1e-6)
    throw NoRouteError("start s outside lane '" + from_lane + "'");
  const double to_len = map.lanes.at(to_lane).length();
  if (to_s < -1e-6 || to_s > to_len + 1e-6)
    throw NoRouteError("goal s outside lane '" + to_lane + "'");

  auto cmp = [](const SearchLabel& a, const SearchLabel& b) { return label_greater(a, b); };
  std::priority_queue<SearchLabel, std::vector<SearchLabel>, decltype(cmp)> open(cmp);

  SearchLabel start;
  start.lane = from_lane;
  start.entry_s = from_s;
  start.offset_entry = true;
  start.steps.push_back({from_lane, false});
  open.push(start);

  std::set<std::pair<std::string, bool>> settled;
  bool found = false;
  SearchLabel best_goal;
  double best_total = 0.0;

  const auto consider_goal = [&](const SearchLabel& lab) {
    if (lab.lane != to_lane || to_s < lab.entry_s - 1e-9) return;
    const double total = lab.cost + (to_s - lab.entry_s);
    if (!found || total < best_total - 1e-12 ||
        (std::abs(total - best_total) <= 1e-12 &&
         (lab.lane_changes < best_goal.lane_changes ||
          (lab.lane_changes == best_goal.lane_changes && lab.path_ids() < best_goal.path_ids())))) {
      found = true;
      best_goal = lab;
      best_total = total;
    }
  };

  while (!open.empty()) {
    SearchLabel cur = open.top();
    open.pop();
    const auto key = std::make_pair(cur.lane, cur.offset_entry);
    if (settled.count(key)) continue;
    settled.insert(key);
    consider_goal(cur);

    const Lane& lane = map.lanes.at(cur.lane);
    for (const auto& succ : lane.successors) {
      SearchLabel next = cur;
      next.cost += lane.length() - cur.entry_s;
      next.lane = succ;
      next.entry_s = 0.0;
      next.offset_entry = false;
      next.steps.push_back({succ, false});
      if (!settled.count({succ, false})) open.push(std::move(next));
    }
    for (const auto& nb : {lane.left_neighbor, lane.right_neighbor}) {
      if (!nb) continue;
      // Lane changes keep s; only entries at s <= neighbor length are valid.
      if (cur.entry_s > map.lanes.at(*nb).length() + 1e-6) continue;
      SearchLabel next = cur;
      next.cost += lane_change_penalty;
      next.lane_changes += 1;
      next.lane = *nb;
      next.steps.push_back({*nb, true});
      if (!settled.count({*nb, cur.offset_entry})) open.push(std::move(next));
    }
  }

  if (!found)
    throw NoRouteError("no route from '" + from_lane + "' (s=" + std::to_string(from_s) +
                       ") to '" + to_lane + "' (s=" + std::to_string(to_s) + ")");

  Route route;
  route.steps = best_goal.steps;
  route.start_s = from_s;
  route.goal_s = to_s;
  route.cost = best_total;
  route.lane_changes = best_goal.lane_changes;
  return route;
}

LaneProjection project(const MapModel& map, const Vec2& position, double d_max) {
  bool found = false;
  LaneProjection best;
  for (const auto& [id, lane] : map.lanes) {
    const PolylineProjection p = lane.centerline.project(position);
    if (std::abs(p.d) > d_max) continue;
    if (!found || std::abs(p.d) < std::abs(best.d) - 1e-9) {
      // Ordered map iteration makes the implicit tie-break (first id wins at
      // equal |d|) lexicographic.
      found = true;
      best = {id, p.s, p.d};
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "position (" << position.x << ", " << position.y << ") is more than " << d_max
       << " m from every lane";
    throw OffRoadError(os.str());
  }
  return best;
}

namespace {

// Integrates a piecewise-linear curvature profile into a polyline with the
// midpoint rule at fixed arc-length steps.
std::vector<Vec2> integrate_profile(const std::vector<std::pair<double, double>>& profile,
                                    double total_len, double step) {
  const auto kappa = [&profile](double s) {
    // profile: sorted (s, kappa) breakpoints, linear in between.
    if (s <= profile.front().first) return profile.front().second;
    if (s >= profile.back().first) return profile.back().second;
    for (std::size_t i = 1; i < profile.size(); ++i) {
      if (s <= profile[i].first) {
        const auto& [s0, k0] = profile[i - 1];
        const auto& [s1, k1] = profile[i];
        const double t = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
        return k0 + (k1 - k0) * t;
      }
    }
    return profile.back().second;
  };

  std::vector<Vec2> pts;
  pts.push_back({0.0, 0.0});
  double x = 0.0, y = 0.0, psi = 0.0, s = 0.0;
  while (s < total_len - 1e-9) {
    const double h = std::min(step, total_len - s);
    const double psi_mid = psi + kappa(s + 0.5 * h) * 0.5 * h;
    x += std::cos(psi_mid) * h;
    y += std::sin(psi_mid) * h;
    psi += kappa(s + 0.5 * h) * h;
    s += h;
    pts.push_back({x, y});
  }
  return pts;
}

}  // namespace

MapModel generate_test_road(double r_arc, double spiral_len, double line_len,
                            double lane_width, double arc_angle) {
  if (!(r_arc > 0.0)) throw ParseError("generate_test_road: r_arc must be positive");
  if (spiral_len < 0.0 || line_len < 0.0 || !(arc_angle > 0.0))
    throw ParseError("generate_test_road: lengths must be non-negative, arc_angle positive");

  const double k = 1.0 / r_arc;
  const double arc_len = r_arc * arc_angle;
  const double s1 = line_len;
  const double s2 = s1 + spiral_len;
  const double s3 = s2 + arc_len;
  const double s4 = s3 + spiral_len;
  const double s5 = s4 + line_len;
  const std::vector<std::pair<double, double>> profile{
      {0.0, 0.0}, {s1, 0.0}, {s2, k}, {s3, k}, {s4, 0.0}, {s5, 0.0}};

  Lane lane;
  lane.id = "road";
  lane.width = lane_width;
  lane.centerline = Polyline(integrate_profile(profile, s5, 0.5));

  MapModel map;
  std::ostringstream ver;
  ver << "testroad-r" << r_arc << "-sp" << spiral_len << "-ln" << line_len;
  map.version = ver.str();
  map.lanes.emplace(lane.id, std::move(lane));
  return map;
}

MapModel generate_intersection(double arm_len, double turn_radius, double lane_width) {
  if (!(arm_len > 0.0) || !(turn_radius > 0.0) || !(lane_width > 0.0))
    throw ParseError("generate_intersection: all dimensions must be positive");

  const double half_w = 0.5 * lane_width;
  const double box = turn_radius + half_w;  // junction box half-size

  MapModel map;
  map.version = "intersection4";

  // Arm frames: unit vector pointing from the junction center outward.
  struct Arm {
    const char* name;
    Vec2 out;  // outward direction
  };
  const Arm arms[4] = {{"n", {0.0, 1.0}}, {"e", {1.0, 0.0}}, {"s", {0.0, -1.0}}, {"w", {-1.0, 0.0}}};

  const auto right_of = [](const Vec2& dir) { return Vec2{dir.y, -dir.x}; };

  for (const auto& arm : arms) {
    const Vec2 inward = Vec2{-arm.out.x, -arm.out.y};
    // Approach lane: runs inward, offset to the right of travel.
    const Vec2 r_in = right_of(inward);
    Lane in;
    in.id = std::string(arm.name) + "_in";
    in.width = lane_width;
    in.centerline = Polyline({arm.out * (box + arm_len) + r_in * half_w,
                              arm.out * box + r_in * half_w});
    // Exit lane: runs outward, offset to the right of travel.
    const Vec2 r_out = right_of(arm.out);
    Lane out;
    out.id = std::string(arm.name) + "_out";
    out.width = lane_width;
    out.centerline = Polyline({arm.out * box + r_out * half_w,
                               arm.out * (box + arm_len) + r_out * half_w});
    map.lanes.emplace(in.id, std::move(in));
    map.lanes.emplace(out.id, std::move(out));
  }

  // Right-turn connectors: from each approach, a clockwise quarter arc into
  // the exit lane of the arm on the driver's right.
  const auto connect = [&](const char* from_arm, const char* to_arm) {
    Lane& in = map.lanes.at(std::string(from_arm) + "_in");
    const std::string out_id = std::string(to_arm) + "_out";
    Lane conn;
    conn.id = std::string(from_arm) + "_to_" + to_arm;
    conn.width = lane_width;

    const Vec2 start = in.centerline.points().back();
    const double heading = in.centerline.heading_at(in.length());
    // Clockwise turn: center sits at the right of the entry heading.
    const Vec2 center{start.x + std::sin(heading) * turn_radius,
                      start.y - std::cos(heading) * turn_radius};
    const double a0 = std::atan2(start.y - center.y, start.x - center.x);
    std::vector<Vec2> pts;
    const int n_steps = std::max(8, static_cast<int>(std::ceil(turn_radius * M_PI_2 / 0.5)));
    for (int i = 0; i <= n_steps; ++i) {
      const double a = a0 - M_PI_2 * static_cast<double>(i) / n_steps;
      pts.push_back({center.x + std::cos(a) * turn_radius, center.y + std::sin(a) * turn_radius});
    }
    conn.centerline = Polyline(std::move(pts));
    conn.successors.push_back(out_id);
    in.successors.push_back(conn.id);
    map.lanes.emplace(conn.id, std::move(conn));
  };
  // Right-hand traffic: s approach (heading north) exits east, w exits south,
  // n exits west, e exits north.
  connect("s", "e");
  connect("w", "s");
  connect("n", "w");
  connect("e", "n");

  return map;
}

}  // namespace agentsim
