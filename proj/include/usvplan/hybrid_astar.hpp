#pragma once

// Hybrid A* over (x, y, heading) with arc motion primitives, a max(grid
// Dijkstra, Reeds-Shepp) heuristic and analytic Reeds-Shepp goal connection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "usvplan/angles.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/reeds_shepp.hpp"
#include "usvplan/trajectory.hpp"

namespace usvplan {

struct Footprint {
  double length = 2.0;
  double width = 1.08;
};

/// Exact separating-axis test between the oriented hull rectangle centred on
/// the pose and an axis-aligned square cell. Touching edges do not overlap.
inline bool footprint_overlaps_cell(const SearchPose& pose, const Footprint& fp, double cell_cx,
                                    double cell_cy, double half_cell) {
  const double c = std::cos(pose.psi), s = std::sin(pose.psi);
  const double a = 0.5 * fp.length, b = 0.5 * fp.width;
  const double dx = cell_cx - pose.x, dy = cell_cy - pose.y;
  const double eps = 1e-12;
  // World axes: rectangle half-extent projected on x and y.
  if (std::abs(dx) >= a * std::abs(c) + b * std::abs(s) + half_cell - eps) return false;
  if (std::abs(dy) >= a * std::abs(s) + b * std::abs(c) + half_cell - eps) return false;
  // Rectangle axes: square half-extent projected on each.
  const double cell_on_axis = half_cell * (std::abs(c) + std::abs(s));
  if (std::abs(dx * c + dy * s) >= a + cell_on_axis - eps) return false;
  if (std::abs(-dx * s + dy * c) >= b + cell_on_axis - eps) return false;
  return true;
}

/// False when any cell under the footprint is blocked or the footprint leaves
/// the grid.
inline bool collision_free(const SearchPose& pose, const OccupancyGrid& grid,
                           const Footprint& fp = {}, bool unknown_is_obstacle = true) {
  if (!(fp.length > 0.0) || !(fp.width > 0.0))
    throw std::invalid_argument("collision_free: footprint must be positive");
  const double c = std::abs(std::cos(pose.psi)), s = std::abs(std::sin(pose.psi));
  const double ex = 0.5 * (fp.length * c + fp.width * s);
  const double ey = 0.5 * (fp.length * s + fp.width * c);
  const auto& spec = grid.spec();
  const double res = spec.resolution;
  const double x0 = pose.x - ex, x1 = pose.x + ex, y0 = pose.y - ey, y1 = pose.y + ey;
  if (!std::isfinite(x0) || !std::isfinite(y0)) return false;
  if (x0 < spec.origin_x || y0 < spec.origin_y || x1 > spec.origin_x + grid.width() ||
      y1 > spec.origin_y + grid.height())
    return false;
  const int c0 = std::max(0, static_cast<int>(std::floor((x0 - spec.origin_x) / res)));
  const int c1 = std::min(grid.ncols() - 1, static_cast<int>(std::floor((x1 - spec.origin_x) / res)));
  const int r0 = std::max(0, static_cast<int>(std::floor((y0 - spec.origin_y) / res)));
  const int r1 = std::min(grid.nrows() - 1, static_cast<int>(std::floor((y1 - spec.origin_y) / res)));
  for (int r = r0; r <= r1; ++r)
    for (int col = c0; col <= c1; ++col) {
      if (!grid.blocked(col, r, unknown_is_obstacle)) continue;
      const Eigen::Vector2d ctr = grid.center(col, r);
      if (footprint_overlaps_cell(pose, fp, ctr.x(), ctr.y(), 0.5 * res)) return false;
    }
  return true;
}

struct MotionPrimitiveSet {
  double arc_length = 1.0;
  std::vector<double> curvatures{0.0, 1.0 / 3.0, -1.0 / 3.0, 1.0 / 6.0, -1.0 / 6.0};
  bool allow_reverse = true;
  double reverse_penalty = 2.0;
  double switch_penalty = 1.0;
  double curvature_penalty = 0.1;

  void validate() const {
    if (!(arc_length > 0.0)) throw std::invalid_argument("MotionPrimitiveSet: arc_length must be > 0");
    if (curvatures.empty()) throw std::invalid_argument("MotionPrimitiveSet: no curvatures");
    for (double k : curvatures)
      if (!(std::abs(k) * arc_length < kPi))
        throw std::invalid_argument("MotionPrimitiveSet: primitive loops on itself");
  }
};

struct SearchOptions {
  double min_turn_radius = 3.0;
  double xy_bin = 0.5;
  int heading_bins = 36;
  double reach_threshold = 3.0;
  bool cheap_shots = true;          ///< extra analytic attempts scaled by 1/h
  double collision_step = 0.25;     ///< spacing of collision checks along motions (m)
  double path_step = 0.5;           ///< spacing of returned poses (m)
  std::size_t max_expansions = 400000;
  Footprint footprint;
  bool unknown_is_obstacle = true;
};

struct PlannedPath {
  std::vector<SearchPose> poses;
  double length = 0.0;  ///< arc length of the underlying curves (m)
  std::size_t expansions = 0;
};

/// Pose after moving `s` metres (signed) along a constant curvature arc.
inline SearchPose advance_arc(const SearchPose& p, double kappa, double s) {
  SearchPose q = p;
  q.direction = s < 0 ? Direction::kReverse : Direction::kForward;
  if (std::abs(kappa) < 1e-12) {
    q.x = p.x + s * std::cos(p.psi);
    q.y = p.y + s * std::sin(p.psi);
    return q;
  }
  const double dpsi = kappa * s;
  q.x = p.x + (std::sin(p.psi + dpsi) - std::sin(p.psi)) / kappa;
  q.y = p.y - (std::cos(p.psi + dpsi) - std::cos(p.psi)) / kappa;
  q.psi = wrap_angle(p.psi + dpsi);
  return q;
}

/// Obstacle-aware lower bound on the remaining path length: 16-connected
/// Dijkstra from the goal cell, deflated by the worst-case ratio of lattice to
/// Euclidean length and by the quantisation of both endpoints.
class HolonomicHeuristic {
 public:
  HolonomicHeuristic() = default;
  HolonomicHeuristic(const OccupancyGrid& grid, double goal_x, double goal_y,
                     bool unknown_is_obstacle = true)
      : spec_(grid.spec()) {
    const int nc = grid.ncols(), nr = grid.nrows();
    const double inf = std::numeric_limits<double>::infinity();
    dist_.assign(static_cast<std::size_t>(nc) * nr, inf);
    auto goal = grid.cell_of(goal_x, goal_y);
    if (!goal) return;
    struct Move {
      int dc, dr;
      double cost;
    };
    std::vector<Move> moves;
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc) {
        const int n = std::abs(dc) + std::abs(dr);
        if (n == 0 || n == 4 || (n == 2 && (dc == 0 || dr == 0))) continue;
        moves.push_back({dc, dr, std::hypot(dc, dr)});
      }
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    const int g = goal->row * nc + goal->col;
    dist_[g] = 0.0;
    open.push({0.0, g});
    while (!open.empty()) {
      auto [d, idx] = open.top();
      open.pop();
      if (d > dist_[idx]) continue;
      const int c = idx % nc, r = idx / nc;
      for (const auto& m : moves) {
        const int cc = c + m.dc, rr = r + m.dr;
        if (!grid.inside(cc, rr) || grid.blocked(cc, rr, unknown_is_obstacle)) continue;
        if (std::abs(m.dc) + std::abs(m.dr) == 3) {
          // Knight moves cross the two cells straddling the segment.
          const int sc = (m.dc > 0) - (m.dc < 0), sr = (m.dr > 0) - (m.dr < 0);
          const int ac = c + (std::abs(m.dc) == 2 ? sc : 0), ar = r + (std::abs(m.dr) == 2 ? sr : 0);
          if (grid.blocked(ac, ar, unknown_is_obstacle) ||
              grid.blocked(c + sc, r + sr, unknown_is_obstacle))
            continue;
        }
        const double nd = d + m.cost * spec_.resolution;
        const int j = rr * nc + cc;
        if (nd < dist_[j]) {
          dist_[j] = nd;
          open.push({nd, j});
        }
      }
    }
  }

  /// Worst lattice-to-Euclidean ratio, 1 / cos(atan(1/2) / 2), rounded up.
  static constexpr double kLatticeRatio = 1.0276;

  double operator()(double x, double y) const {
    if (dist_.empty()) return std::numeric_limits<double>::infinity();
    const double res = spec_.resolution;
    const int c = static_cast<int>(std::floor((x - spec_.origin_x) / res));
    const int r = static_cast<int>(std::floor((y - spec_.origin_y) / res));
    if (c < 0 || r < 0 || c >= spec_.ncols || r >= spec_.nrows)
      return std::numeric_limits<double>::infinity();
    const double d = dist_[static_cast<std::size_t>(r) * spec_.ncols + c];
    if (!std::isfinite(d)) return d;
    return std::max(0.0, d / kLatticeRatio - std::sqrt(2.0) * res);
  }

  double cell_distance(int col, int row) const {
    return dist_[static_cast<std::size_t>(row) * spec_.ncols + col];
  }

 private:
  GridSpec spec_;
  std::vector<double> dist_;
};

inline double heuristic(const SearchPose& pose, const SearchPose& goal,
                        const HolonomicHeuristic& holo, double min_turn_radius) {
  const double h2d = holo(pose.x, pose.y);
  if (!std::isfinite(h2d)) return h2d;
  return std::max(h2d, reeds_shepp_distance(pose, goal, min_turn_radius));
}

inline double heuristic(const SearchPose& pose, const SearchPose& goal, const OccupancyGrid& grid,
                        double min_turn_radius = 3.0) {
  return heuristic(pose, goal, HolonomicHeuristic(grid, goal.x, goal.y), min_turn_radius);
}

namespace astar_detail {

struct Node {
  SearchPose pose;
  double g = 0.0;
  double h = 0.0;
  int parent = -1;
  double kappa = 0.0;
  double step = 0.0;  ///< signed arc length of the primitive from the parent
};

struct QueueEntry {
  double f, h;
  std::uint64_t seq;
  int node;
  bool operator>(const QueueEntry& o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    return seq > o.seq;
  }
};

inline bool motion_free(const SearchPose& from, double kappa, double s, const OccupancyGrid& grid,
                        const SearchOptions& o) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(s) / o.collision_step - 1e-9)));
  for (int i = 1; i <= n; ++i)
    if (!collision_free(advance_arc(from, kappa, s * i / n), grid, o.footprint, o.unknown_is_obstacle))
      return false;
  return true;
}

inline bool rs_free(const ReedsSheppPath& p, const SearchPose& from, const OccupancyGrid& grid,
                    const SearchOptions& o) {
  for (const auto& q : rs_sample(p, from, o.collision_step))
    if (!collision_free(q, grid, o.footprint, o.unknown_is_obstacle)) return false;
  return true;
}

inline void append_motion(std::vector<SearchPose>& out, const SearchPose& from, double kappa,
                          double s, double spacing) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(s) / spacing - 1e-9)));
  for (int i = 1; i <= n; ++i) out.push_back(advance_arc(from, kappa, s * i / n));
}

}  // namespace astar_detail

inline double path_length(const std::vector<SearchPose>& poses) {
  double len = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i)
    len += std::hypot(poses[i].x - poses[i - 1].x, poses[i].y - poses[i - 1].y);
  return len;
}

/// Hybrid A* search. Returns nullopt when the start or goal is in collision,
/// when the open list empties, or when the expansion budget runs out.
inline std::optional<PlannedPath> search(const SearchPose& start, const SearchPose& goal,
                                         const OccupancyGrid& grid,
                                         const MotionPrimitiveSet& prims = {},
                                         const SearchOptions& opts = {}) {
  using namespace astar_detail;
  prims.validate();
  if (!collision_free(start, grid, opts.footprint, opts.unknown_is_obstacle)) return std::nullopt;
  if (!collision_free(goal, grid, opts.footprint, opts.unknown_is_obstacle)) return std::nullopt;

  const HolonomicHeuristic holo(grid, goal.x, goal.y, opts.unknown_is_obstacle);
  const auto& spec = grid.spec();
  const int nbx = std::max(1, static_cast<int>(std::ceil(grid.width() / opts.xy_bin)));
  const int nby = std::max(1, static_cast<int>(std::ceil(grid.height() / opts.xy_bin)));
  auto bin_of = [&](const SearchPose& p) -> std::int64_t {
    const int bx = std::clamp(static_cast<int>(std::floor((p.x - spec.origin_x) / opts.xy_bin)), 0, nbx - 1);
    const int by = std::clamp(static_cast<int>(std::floor((p.y - spec.origin_y) / opts.xy_bin)), 0, nby - 1);
    const double frac = (p.psi + kPi) / kTwoPi;
    int bh = static_cast<int>(std::floor(frac * opts.heading_bins));
    bh = ((bh % opts.heading_bins) + opts.heading_bins) % opts.heading_bins;
    return (static_cast<std::int64_t>(by) * nbx + bx) * opts.heading_bins + bh;
  };
  const std::size_t nbins = static_cast<std::size_t>(nbx) * nby * opts.heading_bins;
  std::vector<double> best_g(nbins, std::numeric_limits<double>::infinity());
  std::vector<char> closed(nbins, 0);

  std::vector<Node> nodes;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
  std::uint64_t seq = 0;
  SearchPose s0 = start;
  s0.psi = wrap_angle(s0.psi);
  const double h0 = heuristic(s0, goal, holo, opts.min_turn_radius);
  if (!std::isfinite(h0)) return std::nullopt;
  nodes.push_back({s0, 0.0, h0, -1, 0.0, 0.0});
  best_g[bin_of(s0)] = 0.0;
  open.push({h0, h0, seq++, 0});

  auto finish = [&](int idx, const ReedsSheppPath& rs, std::size_t expansions) {
    std::vector<int> chain;
    for (int i = idx; i >= 0; i = nodes[i].parent) chain.push_back(i);
    std::reverse(chain.begin(), chain.end());
    PlannedPath out;
    out.poses.push_back(nodes[chain.front()].pose);
    for (std::size_t k = 1; k < chain.size(); ++k) {
      const Node& n = nodes[chain[k]];
      append_motion(out.poses, nodes[n.parent].pose, n.kappa, n.step, opts.path_step);
    }
    const auto tail = rs_sample(rs, nodes[idx].pose, opts.path_step);
    out.poses.insert(out.poses.end(), tail.begin() + 1, tail.end());
    if (out.poses.size() > 1) out.poses.front().direction = out.poses[1].direction;
    out.length = rs.length();
    for (std::size_t k = 1; k < chain.size(); ++k) out.length += std::abs(nodes[chain[k]].step);
    out.expansions = expansions;
    return out;
  };

  double shot_credit = 1.0;
  std::size_t expansions = 0;
  std::vector<double> steps{prims.arc_length};
  if (prims.allow_reverse) steps.push_back(-prims.arc_length);

  while (!open.empty()) {
    const QueueEntry top = open.top();
    open.pop();
    const Node cur = nodes[top.node];
    const std::int64_t cur_bin = bin_of(cur.pose);
    if (closed[cur_bin] || cur.g > best_g[cur_bin] + 1e-12) continue;
    closed[cur_bin] = 1;

    const double dist_goal = std::hypot(cur.pose.x - goal.x, cur.pose.y - goal.y);
    bool shoot = dist_goal <= opts.reach_threshold;
    if (!shoot && opts.cheap_shots) {
      shot_credit += opts.reach_threshold / std::max(cur.h, 1e-9);
      if (shot_credit >= 1.0) {
        shot_credit -= 1.0;
        shoot = true;
      }
    }
    if (shoot) {
      const ReedsSheppPath rs = reeds_shepp_connect(cur.pose, goal, opts.min_turn_radius);
      if (rs_free(rs, cur.pose, grid, opts)) return finish(top.node, rs, expansions);
    }

    if (++expansions > opts.max_expansions) return std::nullopt;
    for (double s : steps) {
      for (double kappa : prims.curvatures) {
        if (!motion_free(cur.pose, kappa, s, grid, opts)) continue;
        Node nxt;
        nxt.pose = advance_arc(cur.pose, kappa, s);
        const std::int64_t b = bin_of(nxt.pose);
        if (closed[b]) continue;
        const bool reverse = s < 0;
        double cost = prims.arc_length * (reverse ? prims.reverse_penalty : 1.0);
        const bool cur_reverse = cur.pose.direction == Direction::kReverse;
        if (reverse != cur_reverse) cost += prims.switch_penalty;
        cost += prims.curvature_penalty * std::abs(kappa) * prims.arc_length;
        nxt.g = cur.g + cost;
        if (!(nxt.g < best_g[b] - 1e-12)) continue;
        nxt.h = heuristic(nxt.pose, goal, holo, opts.min_turn_radius);
        if (!std::isfinite(nxt.h)) continue;
        nxt.parent = top.node;
        nxt.kappa = kappa;
        nxt.step = s;
        best_g[b] = nxt.g;
        nodes.push_back(nxt);
        open.push({nxt.g + nxt.h, nxt.h, seq++, static_cast<int>(nodes.size() - 1)});
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Path CSV: s,x,y,psi,direction with direction +1 forward, -1 reverse.

inline void write_path_csv(std::ostream& out, const PlannedPath& path) {
  using detail::fmt_num;
  out << "s,x,y,psi,direction\n";
  double s = 0.0;
  for (std::size_t i = 0; i < path.poses.size(); ++i) {
    const auto& p = path.poses[i];
    if (i > 0) s += std::hypot(p.x - path.poses[i - 1].x, p.y - path.poses[i - 1].y);
    out << fmt_num(s) << ',' << fmt_num(p.x) << ',' << fmt_num(p.y) << ',' << fmt_num(p.psi) << ','
        << (p.direction == Direction::kReverse ? -1 : 1) << '\n';
  }
}

inline void save_path_csv(const std::string& path, const PlannedPath& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_path_csv(out, p);
}

inline PlannedPath read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("s,x,y,psi,direction", 0) != 0)
    throw std::runtime_error("path csv: unexpected header");
  PlannedPath p;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    double s, x, y, psi;
    int dir;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d", &s, &x, &y, &psi, &dir) != 5)
      throw std::runtime_error("path csv: malformed row '" + line + "'");
    p.poses.push_back({x, y, wrap_angle(psi), dir < 0 ? Direction::kReverse : Direction::kForward});
  }
  p.length = path_length(p.poses);
  return p;
}

}  // namespace usvplan
