#pragma once

// Scenario files: map primitives (or an aerial mask + camera), start and goal
// poses, hull, cost weights and controller settings.
//
//   name = wall_gaps
//   seed = 7
//   [map]
//   width = 100
//   height = 60
//   resolution = 0.5
//   inflation = 1.2
//   rect = x0 y0 x1 y1          # repeatable
//   circle = cx cy radius       # repeatable
//   random_blocks = count min_size max_size
//   mask = file.pgm             # optional, with camera = file.cam
//   [start]   x, y, psi, u
//   [goal]    x, y, psi, u
//   [route]   segment = curvature length   # replaces the global search
//   [hull]    file = ../otter.hull, plus per-key overrides
//   [weights] w_x (6), w_tau (2), w_u (2), obstacle_margin, obstacle_weight
//   [planner] cruise, min_turn_radius, sensing_radius, ref_dt
//   [controller] nmpc_horizon, nmpc_dt, nmpc_w_x, nmpc_w_tau, nmpc_w_u,
//                pid_heading (kp ki kd), pid_speed (kp ki kd), pid_lookahead, sim_dt
//
// Relative file paths resolve against the scenario file's directory.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "usvplan/aerial_mapping.hpp"
#include "usvplan/config.hpp"
#include "usvplan/hybrid_astar.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/tracking_control.hpp"
#include "usvplan/trajectory_optimizer.hpp"
#include "usvplan/vessel_state.hpp"

namespace usvplan {

struct RectObstacle {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct CircleObstacle {
  double cx = 0, cy = 0, radius = 0;
};

struct RouteSegment {
  double curvature = 0.0;
  double length = 0.0;
};

struct Scenario {
  std::string name;
  int seed = 0;

  double width = 0.0, height = 0.0;
  double resolution = 0.5;
  double inflation = 1.2;
  std::vector<RectObstacle> rects;
  std::vector<CircleObstacle> circles;
  int random_blocks = 0;
  double random_block_min = 2.0, random_block_max = 6.0;
  std::optional<SegMask> mask;
  std::optional<CameraModel> camera;

  SearchPose start, goal;
  double start_speed = 0.0, goal_speed = 0.0;
  std::vector<RouteSegment> route;

  HullParams hull;
  CostWeights weights;
  OptimizerOptions optimizer;
  MotionPrimitiveSet primitives;
  SearchOptions search;
  NmpcConfig nmpc;
  PidConfig pid;
  double cruise = 1.5;
  double sensing_radius = 20.0;
  double ref_dt = 0.1;
  double sim_dt = 0.05;

  OccupancyGrid grid;      ///< rasterised obstacles
  OccupancyGrid inflated;  ///< planner / optimizer view

  VesselState start_state() const { return {start.x, start.y, start.psi, start_speed, 0.0, 0.0}; }
  VesselState goal_state() const { return {goal.x, goal.y, goal.psi, goal_speed, 0.0, 0.0}; }
};

class ScenarioError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline int occupied_cells(const OccupancyGrid& g) {
  return static_cast<int>(std::count(g.cells().begin(), g.cells().end(), Cell::kOccupied));
}

namespace scenario_detail {

inline void reject_unknown_keys(const ConfigSection& s, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& e : s.entries())
    if (!ok.count(e.key)) {
      const std::string where = s.name().empty() ? e.key : s.name() + "." + e.key;
      throw ScenarioError(where + " (line " + std::to_string(e.line) + "): unknown key");
    }
}

inline void read_weights(const ConfigSection& s, const std::string& prefix, CostWeights& w) {
  if (s.has(prefix + "w_x")) {
    const auto v = s.numbers(prefix + "w_x", 6);
    for (int i = 0; i < 6; ++i) w.w_x[i] = v[i];
  }
  if (s.has(prefix + "w_tau")) {
    const auto v = s.numbers(prefix + "w_tau", 2);
    w.w_tau = {v[0], v[1]};
  }
  if (s.has(prefix + "w_u")) {
    const auto v = s.numbers(prefix + "w_u", 2);
    w.w_u = {v[0], v[1]};
  }
}

inline PidGains read_gains(const ConfigSection& s, const std::string& key, PidGains fallback) {
  if (!s.has(key)) return fallback;
  const auto v = s.numbers(key, 3);
  return {v[0], v[1], v[2]};
}

inline SearchPose read_pose(const ConfigSection& s, double& speed) {
  reject_unknown_keys(s, {"x", "y", "psi", "u"});
  SearchPose p;
  p.x = s.number("x");
  p.y = s.number("y");
  p.psi = wrap_angle(s.number_or("psi", 0.0));
  speed = s.number_or("u", 0.0);
  return p;
}

inline std::string resolve(const std::string& base_dir, const std::string& file) {
  const std::filesystem::path p(file);
  if (p.is_absolute() || base_dir.empty()) return file;
  return (std::filesystem::path(base_dir) / p).string();
}

/// Uniform [0, 1) from the top 53 bits; identical on every standard library.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool cell_overlaps_rect(const GridSpec& g, int c, int r, const RectObstacle& o) {
  const double cx0 = g.origin_x + c * g.resolution, cy0 = g.origin_y + r * g.resolution;
  return cx0 < o.x1 && cx0 + g.resolution > o.x0 && cy0 < o.y1 && cy0 + g.resolution > o.y0;
}

inline bool cell_overlaps_circle(const GridSpec& g, int c, int r, const CircleObstacle& o) {
  const double cx0 = g.origin_x + c * g.resolution, cy0 = g.origin_y + r * g.resolution;
  const double px = std::clamp(o.cx, cx0, cx0 + g.resolution), py = std::clamp(o.cy, cy0, cy0 + g.resolution);
  return std::hypot(px - o.cx, py - o.cy) < o.radius;
}

}  // namespace scenario_detail

/// Marks every cell whose interior overlaps a primitive as occupied.
inline void rasterize(OccupancyGrid& grid, const std::vector<RectObstacle>& rects,
                      const std::vector<CircleObstacle>& circles) {
  using namespace scenario_detail;
  const auto& g = grid.spec();
  auto paint = [&](double x0, double y0, double x1, double y1, auto&& hit) {
    const int c0 = std::max(0, static_cast<int>(std::floor((x0 - g.origin_x) / g.resolution)));
    const int c1 = std::min(g.ncols - 1, static_cast<int>(std::floor((x1 - g.origin_x) / g.resolution)));
    const int r0 = std::max(0, static_cast<int>(std::floor((y0 - g.origin_y) / g.resolution)));
    const int r1 = std::min(g.nrows - 1, static_cast<int>(std::floor((y1 - g.origin_y) / g.resolution)));
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        if (hit(c, r)) grid.set(c, r, Cell::kOccupied);
  };
  for (const auto& o : rects) paint(o.x0, o.y0, o.x1, o.y1, [&](int c, int r) { return cell_overlaps_rect(g, c, r, o); });
  for (const auto& o : circles)
    paint(o.cx - o.radius, o.cy - o.radius, o.cx + o.radius, o.cy + o.radius,
          [&](int c, int r) { return cell_overlaps_circle(g, c, r, o); });
}

/// Global-plan pose sequence for a prescribed route, sampled every 0.5 m.
inline PlannedPath route_path(const Scenario& s) {
  PlannedPath p;
  p.poses.push_back(s.start);
  for (const auto& seg : s.route) {
    const SearchPose from = p.poses.back();
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(seg.length) / 0.5)));
    for (int k = 1; k <= n; ++k) p.poses.push_back(advance_arc(from, seg.curvature, seg.length * k / n));
  }
  p.length = path_length(p.poses);
  return p;
}

/// Builds the grids (placing random blocks first) and checks the start and
/// goal.
inline void finalize_scenario(Scenario& s) {
  using namespace scenario_detail;
  if (!(s.width > 0.0) || !(s.height > 0.0)) throw ScenarioError("map: width and height must be > 0");
  if (!(s.resolution > 0.0)) throw ScenarioError("map.resolution: must be > 0");
  if (!(s.inflation >= 0.0)) throw ScenarioError("map.inflation: must be >= 0");
  for (const auto& c : s.circles)
    if (!(c.radius > 0.0)) throw ScenarioError("map.circle: radius must be > 0");
  for (const auto& r : s.rects)
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw ScenarioError("map.rect: need x0 < x1 and y0 < y1");
  if (!(s.cruise > 0.0) || s.cruise > s.hull.u_max) throw ScenarioError("planner.cruise: must be in (0, u_max]");
  if (!(s.sensing_radius > 0.0)) throw ScenarioError("planner.sensing_radius: must be > 0");
  try {
    s.weights.validate();
    s.nmpc.validate();
    s.pid.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  auto inside = [&](const SearchPose& p) { return p.x >= 0 && p.y >= 0 && p.x <= s.width && p.y <= s.height; };
  if (!inside(s.start)) throw ScenarioError("start outside the map");
  if (!inside(s.goal)) throw ScenarioError("goal outside the map");

  const GridSpec spec = GridSpec::covering(s.width, s.height, s.resolution);
  OccupancyGrid grid(spec, Cell::kFree);
  if (s.mask) {
    if (!s.camera) throw ScenarioError("map.mask: needs map.camera");
    try {
      grid = mask_to_grid(*s.mask, s.camera->intrinsics, s.camera->pose, spec);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(std::string("map.mask: ") + e.what());
    }
  }
  rasterize(grid, s.rects, s.circles);
  s.grid = grid;
  s.inflated = inflate(grid, s.inflation);

  if (s.random_blocks > 0) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(s.seed));
    int placed = 0;
    for (int attempt = 0; placed < s.random_blocks && attempt < 1000 * s.random_blocks; ++attempt) {
      const double w = s.random_block_min + unit(rng) * (s.random_block_max - s.random_block_min);
      const double h = s.random_block_min + unit(rng) * (s.random_block_max - s.random_block_min);
      const double x = unit(rng) * (s.width - w), y = unit(rng) * (s.height - h);
      const RectObstacle r{x, y, x + w, y + h};
      OccupancyGrid g = s.grid;
      rasterize(g, {r}, {});
      const OccupancyGrid gi = inflate(g, s.inflation);
      if (!collision_free(s.start, gi, s.search.footprint, true) || !collision_free(s.goal, gi, s.search.footprint, true))
        continue;
      s.rects.push_back(r);
      s.grid = g;
      s.inflated = gi;
      ++placed;
    }
    s.random_blocks = 0;
  }

  if (!s.route.empty()) {
    const SearchPose end = route_path(s).poses.back();
    if (std::hypot(end.x - s.goal.x, end.y - s.goal.y) > 0.5 || std::abs(angle_diff(end.psi, s.goal.psi)) > 0.05)
      throw ScenarioError("route: does not end at the goal");
  }
  if (!collision_free(s.start, s.inflated, s.search.footprint, s.search.unknown_is_obstacle))
    throw ScenarioError("start in collision");
  if (!collision_free(s.goal, s.inflated, s.search.footprint, s.search.unknown_is_obstacle))
    throw ScenarioError("goal in collision");
}

inline Scenario parse_scenario(const ConfigFile& cfg, const std::string& base_dir = {},
                               std::optional<int> seed_override = std::nullopt) {
  using namespace scenario_detail;
  Scenario s;
  const auto& root = cfg.root();
  reject_unknown_keys(root, {"name", "seed"});
  s.name = root.text_or("name", "scenario");
  s.seed = seed_override ? *seed_override : static_cast<int>(root.number_or("seed", 0));

  const auto& map = cfg.require("map");
  reject_unknown_keys(map, {"width", "height", "resolution", "inflation", "rect", "circle", "random_blocks", "mask",
                            "camera"});
  s.width = map.number("width");
  s.height = map.number("height");
  s.resolution = map.number_or("resolution", s.resolution);
  s.inflation = map.number_or("inflation", s.inflation);
  for (const auto* e : map.all("rect")) {
    const auto v = map.parse_numbers(*e, 4);
    s.rects.push_back({std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]), std::max(v[1], v[3])});
  }
  for (const auto* e : map.all("circle")) {
    const auto v = map.parse_numbers(*e, 3);
    s.circles.push_back({v[0], v[1], v[2]});
  }
  if (const auto* e = map.find("random_blocks")) {
    const auto v = map.parse_numbers(*e, 3);
    if (v[0] < 0 || !(v[1] > 0) || v[2] < v[1]) throw ScenarioError("map.random_blocks: expected count min max");
    s.random_blocks = static_cast<int>(v[0]);
    s.random_block_min = v[1];
    s.random_block_max = v[2];
  }
  if (map.has("mask")) {
    try {
      s.mask = load_pgm_mask(resolve(base_dir, map.text("mask")));
      s.camera = load_camera(resolve(base_dir, map.text("camera")));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ScenarioError(std::string("map.mask: ") + e.what());
    }
  }

  s.start = read_pose(cfg.require("start"), s.start_speed);
  s.goal = read_pose(cfg.require("goal"), s.goal_speed);

  if (const auto* route = cfg.section("route")) {
    reject_unknown_keys(*route, {"segment"});
    for (const auto* e : route->all("segment")) {
      const auto v = route->parse_numbers(*e, 2);
      s.route.push_back({v[0], v[1]});
    }
  }

  if (const auto* hull = cfg.section("hull")) {
    HullParams base;
    if (hull->has("file")) base = HullParams::load(resolve(base_dir, hull->text("file")));
    s.hull = base.overridden_by(*hull);
  }

  if (const auto* w = cfg.section("weights")) {
    reject_unknown_keys(*w, {"w_x", "w_tau", "w_u", "obstacle_margin", "obstacle_weight"});
    read_weights(*w, "", s.weights);
    s.optimizer.obstacle_margin = w->number_or("obstacle_margin", s.optimizer.obstacle_margin);
    s.optimizer.obstacle_weight = w->number_or("obstacle_weight", s.optimizer.obstacle_weight);
  }

  if (const auto* p = cfg.section("planner")) {
    reject_unknown_keys(*p, {"cruise", "min_turn_radius", "sensing_radius", "ref_dt"});
    s.cruise = p->number_or("cruise", s.cruise);
    s.search.min_turn_radius = p->number_or("min_turn_radius", s.search.min_turn_radius);
    s.sensing_radius = p->number_or("sensing_radius", s.sensing_radius);
    s.ref_dt = p->number_or("ref_dt", s.ref_dt);
  }

  if (const auto* c = cfg.section("controller")) {
    reject_unknown_keys(*c, {"nmpc_horizon", "nmpc_dt", "nmpc_w_x", "nmpc_w_tau", "nmpc_w_u", "pid_heading",
                             "pid_speed", "pid_lookahead", "sim_dt"});
    s.nmpc.horizon = static_cast<int>(c->number_or("nmpc_horizon", s.nmpc.horizon));
    s.nmpc.dt = c->number_or("nmpc_dt", s.nmpc.dt);
    read_weights(*c, "nmpc_", s.nmpc.weights);
    s.pid.heading = read_gains(*c, "pid_heading", s.pid.heading);
    s.pid.speed = read_gains(*c, "pid_speed", s.pid.speed);
    s.pid.lookahead = c->number_or("pid_lookahead", s.pid.lookahead);
    s.sim_dt = c->number_or("sim_dt", s.sim_dt);
  }
  if (!(s.ref_dt > 0.0)) throw ScenarioError("planner.ref_dt: must be > 0");
  if (!(s.sim_dt > 0.0)) throw ScenarioError("controller.sim_dt: must be > 0");

  finalize_scenario(s);
  return s;
}

inline Scenario load_scenario(const std::string& path, std::optional<int> seed_override = std::nullopt) {
  const ConfigFile cfg = ConfigFile::load(path);
  return parse_scenario(cfg, std::filesystem::path(path).parent_path().string(), seed_override);
}

/// Stretches every primitive, pose and the extent to `width` x `height`
/// (circle radii by the smaller factor) and rebuilds the grids. Mask-based
/// maps cannot be rescaled.
inline Scenario rescale_scenario(const Scenario& in, double width, double height) {
  if (in.mask) throw ScenarioError("mask-based scenarios cannot be rescaled");
  Scenario s = in;
  const double sx = width / in.width, sy = height / in.height, sr = std::min(sx, sy);
  s.width = width;
  s.height = height;
  for (auto& r : s.rects) r = {r.x0 * sx, r.y0 * sy, r.x1 * sx, r.y1 * sy};
  for (auto& c : s.circles) c = {c.cx * sx, c.cy * sy, c.radius * sr};
  s.start.x *= sx;
  s.start.y *= sy;
  s.goal.x *= sx;
  s.goal.y *= sy;
  for (auto& seg : s.route) seg.length *= sr;
  finalize_scenario(s);
  return s;
}

}  // namespace usvplan
